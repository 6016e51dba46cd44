// miniseg: generate data, train, evaluate, predict and compare runs.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "miniseg/checkpoint.hpp"
#include "miniseg/data.hpp"
#include "miniseg/error.hpp"
#include "miniseg/metrics.hpp"
#include "miniseg/pgm.hpp"
#include "miniseg/run_config.hpp"
#include "miniseg/summary.hpp"
#include "miniseg/train.hpp"

namespace fs = std::filesystem;
using namespace miniseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

// Input problems detected before any work starts.
struct UsageFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::size_t threads_from_env() {
    const char* v = std::getenv("MINISEG_THREADS");
    if (!v || !*v) return 0;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 0) throw UsageFailure(std::string("MINISEG_THREADS must be a non-negative integer, got '") + v + "'");
    return static_cast<std::size_t>(n);
}

// Runs f, mapping exceptions thrown while reading inputs to usage failures.
template <typename F>
auto load_input(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw UsageFailure(e.what());
    }
}

int cmd_gen_data(std::uint64_t seed, std::size_t count, std::size_t size, double noise, std::size_t clients,
                 const fs::path& out) {
    SynthConfig cfg{seed, count, size, noise};
    try {
        cfg.validate();
        if (clients < 1 || clients > count) throw std::invalid_argument("clients must be in [1, count]");
    } catch (const std::invalid_argument& e) {
        throw UsageFailure(e.what());
    }
    try {
        write_synthetic(cfg, out, clients);
    } catch (const IoError& e) {
        throw UsageFailure(e.what());
    }
    std::cout << "wrote " << count << " samples to " << out.string() << '\n';
    return kExitOk;
}

int cmd_train(const fs::path& config_path) {
    const RunConfig cfg = load_input([&] { return load_run_config(config_path); });
    TrainOptions opts;
    opts.threads = threads_from_env();
    opts.threshold = cfg.threshold;
    opts.log = &std::cout;

    auto [train_manifest, val_manifest] = load_input([&] {
        const Manifest all = load_manifest(cfg.manifest);
        if (!cfg.val_manifest.empty()) return TrainValSplit{all, load_manifest(cfg.val_manifest)};
        return split_train_val(all, cfg.val_fraction, cfg.strategy.seed);
    });
    const auto train_set = load_input([&] { return load_samples(train_manifest); });
    const auto val_set = load_input([&] { return load_samples(val_manifest); });
    if (cfg.strategy.kind == StrategyKind::fedavg && cfg.shards == ShardSource::manifest) {
        for (const auto& e : train_manifest.entries) opts.client_assignment.push_back(e.client);
    }

    TrainReport report;
    try {
        report = train(cfg.model, cfg.strategy, cfg.schedule, cfg.optimizer, train_set, val_set, cfg.out_dir, opts);
    } catch (const std::invalid_argument& e) {
        throw UsageFailure(e.what());
    }
    const auto& last = report.rows.back();
    std::cout << "epoch,train_loss,val_loss,val_fscore,lr,bytes_cum\n"
              << last.epoch << ',' << format_double(last.train_loss) << ',' << format_double(last.val_loss) << ','
              << format_double(last.val_fscore) << ',' << format_double(last.lr) << ',' << last.bytes_cum << '\n'
              << "best epoch " << report.best_epoch << " -> " << report.best_checkpoint_path.string() << '\n';
    return kExitOk;
}

int cmd_eval(const fs::path& ckpt, const fs::path& manifest_path, double threshold, std::size_t batch) {
    UNet model = load_input([&] { return load_checkpoint(ckpt); });
    const auto samples = load_input([&] { return load_samples(load_manifest(manifest_path)); });
    const std::size_t size = model.config().input_size;
    for (const auto& s : samples) {
        if (s.image.shape().h != size || s.image.shape().w != size) {
            throw UsageFailure("data images are " + std::to_string(s.image.shape().h) + "x" +
                               std::to_string(s.image.shape().w) + " but the checkpoint expects " +
                               std::to_string(size) + "x" + std::to_string(size));
        }
    }
    const auto r = evaluate(model, samples, batch, threshold);
    std::cout << format_double(r.loss) << ',' << format_double(f_score(r.counts)) << ','
              << format_double(dice(r.counts)) << ',' << format_double(iou(r.counts)) << ','
              << format_double(accuracy(r.counts)) << '\n';
    return kExitOk;
}

int cmd_predict(const fs::path& ckpt, const fs::path& image_path, const fs::path& out, double threshold) {
    UNet model = load_input([&] { return load_checkpoint(ckpt); });
    const Tensor image = load_input([&] { return read_pgm(image_path); });
    const std::size_t size = model.config().input_size;
    if (image.shape().h != size || image.shape().w != size) {
        throw UsageFailure("image is " + std::to_string(image.shape().h) + "x" + std::to_string(image.shape().w) +
                           " but the model expects " + std::to_string(size) + "x" + std::to_string(size));
    }
    Tensor probs = model.forward(image);
    for (double& v : probs.data()) v = v >= threshold ? 1.0 : 0.0;
    write_pgm(out, probs);
    return kExitOk;
}

int cmd_report(const std::vector<std::string>& runs, const fs::path& out) {
    std::vector<RunSummary> loaded;
    for (const auto& dir : runs) loaded.push_back(load_input([&] { return load_run(dir); }));
    const std::string csv = merge_reports(loaded);
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing", out);
    f << csv;
    if (!f) throw IoError("write failed", out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"miniseg: U-Net segmentation training under SGD, synchronous DSGD and FedAvg"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::size_t count = 0;
    std::size_t size = 64;
    double noise = 0.05;
    std::size_t clients = 1;
    std::string out_dir;
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic image/mask dataset with manifest.csv");
    gen->add_option("--seed", seed, "Generator seed")->required();
    gen->add_option("--count", count, "Number of samples")->required();
    gen->add_option("--size", size, "Image side length in pixels (multiple of 16)")->capture_default_str();
    gen->add_option("--noise", noise, "Gaussian noise sigma")->capture_default_str();
    gen->add_option("--clients", clients, "Client ids written to the manifest")->capture_default_str();
    gen->add_option("--out", out_dir, "Output directory")->required();

    std::string config;
    auto* trn = app.add_subcommand("train", "Train according to a JSON run config");
    trn->add_option("--config", config, "Run config (JSON)")->required();

    std::string ckpt, manifest;
    double threshold = 0.5;
    std::size_t batch = 8;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; prints loss,fscore,dice,iou,accuracy");
    ev->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    ev->add_option("--manifest", manifest, "Dataset manifest")->required();
    ev->add_option("--threshold", threshold, "Probability threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    ev->add_option("--batch", batch, "Evaluation batch size")->capture_default_str()->check(CLI::PositiveNumber);

    std::string image, mask_out;
    auto* pred = app.add_subcommand("predict", "Write a binary mask PGM for one image");
    pred->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    pred->add_option("--image", image, "Input PGM")->required();
    pred->add_option("--out", mask_out, "Output mask PGM")->required();
    pred->add_option("--threshold", threshold, "Probability threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));

    std::vector<std::string> runs;
    std::string summary_out;
    auto* rep = app.add_subcommand("report", "Merge run reports into one comparison CSV");
    rep->add_option("--runs", runs, "Run output directories")->required();
    rep->add_option("--out", summary_out, "Summary CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) return cmd_gen_data(seed, count, size, noise, clients, out_dir);
        if (*trn) return cmd_train(config);
        if (*ev) return cmd_eval(ckpt, manifest, threshold, batch);
        if (*pred) return cmd_predict(ckpt, image, mask_out, threshold);
        if (*rep) return cmd_report(runs, summary_out);
    } catch (const UsageFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
