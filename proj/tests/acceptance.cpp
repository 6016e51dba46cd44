// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "gradcheck.hpp"
#include "miniseg/checkpoint.hpp"
#include "miniseg/data.hpp"
#include "miniseg/kernels.hpp"
#include "miniseg/metrics.hpp"
#include "miniseg/optim.hpp"
#include "miniseg/pgm.hpp"
#include "miniseg/summary.hpp"
#include "miniseg/train.hpp"

using namespace miniseg;
using namespace miniseg::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& s) {
        if (pass) detail += (detail.empty() ? "" : "; ") + s;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path g_tmp;

UNetConfig grad_model(std::uint64_t seed) {
    UNetConfig cfg;
    cfg.input_size = 16;  // smallest size that survives four 2x poolings
    cfg.stage_channels = {2, 2, 4, 4, 4};
    cfg.seed = seed;
    return cfg;
}

std::vector<Sample> synth(std::size_t n, std::size_t size, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.count = n;
    cfg.size = size;
    std::vector<Sample> out;
    for (auto& s : gen_synthetic(cfg)) out.push_back(std::move(s.sample));
    return out;
}

double max_abs_diff(const ParamStore& a, const ParamStore& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto x = a[i].value.data();
        const auto y = b[i].value.data();
        for (std::size_t k = 0; k < x.size(); ++k) m = std::max(m, std::abs(x[k] - y[k]));
    }
    return m;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, const fs::path& out) {
    const std::string cmd = std::string("'") + MINISEG_CLI + "' " + args + " >'" + out.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---- 1 ----

Outcome schedule_reproduction() {
    Outcome o;
    const double table[] = {1e-5, 1e-4, 9.62e-5, 8.55e-5, 6.94e-5, 5.05e-5, 3.16e-5, 1.55e-5, 4.77e-6, 1e-6};
    const ScheduleConfig cfg;
    for (std::size_t e = 1; e <= 10; ++e) {
        const double lr = lr_at_epoch(e, cfg);
        char got[32], want[32];
        std::snprintf(got, sizeof got, "%.2e", lr);
        std::snprintf(want, sizeof want, "%.2e", table[e - 1]);
        o.require(std::string(got) == want, "epoch " + std::to_string(e) + " gave " + got + ", expected " + want);
    }
    o.note("10/10 epochs match to 3 significant figures");
    return o;
}

// ---- 2 ----

Outcome gradient_integrity() {
    Outcome o;
    double worst = 0.0;
    auto layer = [&](const std::string& name, std::span<const double> analytic, const std::vector<double>& numeric) {
        const double e = relative_error(analytic, numeric);
        worst = std::max(worst, e);
        o.require(e < 1e-5, name + " relative error " + fmt("%.2e", e));
    };

    for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{1, 1}, {1, 0}, {2, 1}}) {
        const Tensor x = random_tensor({2, 3, 7, 7}, 11, -1, 1);
        const Tensor w = random_tensor({4, 3, 3, 3}, 12, -0.5, 0.5);
        Tensor bt = random_tensor({1, 1, 1, 4}, 13, -0.1, 0.1);
        const Tensor r = random_tensor(conv2d_forward(x, w, bt.data(), stride, pad).shape(), 14, -1, 1);
        const auto g = conv2d_backward(x, w, r, stride, pad);
        Tensor xv = x, wv = w;
        auto loss = [&] { return dot(conv2d_forward(xv, wv, bt.data(), stride, pad).data(), r.data()); };
        const std::string tag = "conv2d(s" + std::to_string(stride) + ",p" + std::to_string(pad) + ")";
        layer(tag + " dx", g.dx.data(), numeric_grad(xv, loss));
        layer(tag + " dw", g.dw.data(), numeric_grad(wv, loss));
        layer(tag + " db", g.db, numeric_grad(bt, loss));
    }
    {
        Tensor x = random_tensor({2, 3, 5, 5}, 21, 0.05, 1);
        Xoshiro256 sign(22);
        for (double& v : x.data()) v *= sign.uniform() < 0.5 ? -1 : 1;  // |x| >= 0.05, away from the kink
        const Tensor r = random_tensor(x.shape(), 23, -1, 1);
        auto loss = [&] { return dot(relu(x).data(), r.data()); };
        layer("relu", relu_backward(x, r).data(), numeric_grad(x, loss));
    }
    {
        Tensor x = random_tensor({2, 2, 6, 6}, 31, -1, 1);
        const auto pr = maxpool2x2(x);
        const Tensor r = random_tensor(pr.y.shape(), 32, -1, 1);
        auto loss = [&] { return dot(maxpool2x2(x).y.data(), r.data()); };
        layer("maxpool2x2", maxpool2x2_backward(pr.index, r).data(), numeric_grad(x, loss));
    }
    {
        Tensor x = random_tensor({2, 2, 3, 3}, 41, -1, 1);
        const Tensor r = random_tensor({2, 2, 6, 6}, 42, -1, 1);
        auto loss = [&] { return dot(upsample2x_nearest(x).data(), r.data()); };
        layer("upsample2x", upsample2x_nearest_backward(r).data(), numeric_grad(x, loss));
    }
    {
        Tensor a = random_tensor({2, 2, 4, 4}, 51, -1, 1), b = random_tensor({2, 3, 4, 4}, 52, -1, 1);
        const Tensor r = random_tensor({2, 5, 4, 4}, 53, -1, 1);
        auto loss = [&] { return dot(concat_channels(a, b).data(), r.data()); };
        const auto g = concat_channels_backward(r, 2);
        layer("concat da", g.a.data(), numeric_grad(a, loss));
        layer("concat db", g.b.data(), numeric_grad(b, loss));
    }
    {
        Tensor x = random_tensor({2, 1, 4, 4}, 61, -4, 4);
        const Tensor r = random_tensor(x.shape(), 62, -1, 1);
        auto loss = [&] { return dot(sigmoid(x).data(), r.data()); };
        layer("sigmoid", sigmoid_backward(sigmoid(x), r).data(), numeric_grad(x, loss));
    }
    {
        Tensor p = random_tensor({3, 1, 4, 4}, 71, 0.05, 0.95);
        Tensor m(p.shape());
        Xoshiro256 rng(72);
        for (double& v : m.data()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
        auto loss = [&] { return bce_dice_loss(p, m).loss; };
        layer("bce+dice", bce_dice_loss(p, m).dpred.data(), numeric_grad(p, loss));
    }

    // End to end through the reduced U-Net.
    UNet model(grad_model(81));
    Xoshiro256 rng(82);
    for (auto& p : model.params())
        if (p.dims.size() == 1)
            for (double& v : p.value.data()) v = rng.uniform(-0.1, 0.1);
    const Tensor x = random_tensor({2, 1, 16, 16}, 83, 0, 1);
    Tensor mask(x.shape());
    for (double& v : mask.data()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
    model.params().zero_grad();
    model.backward(bce_dice_loss(model.forward(x), mask).dpred);
    std::vector<double> analytic, numeric;
    for (auto& p : model.params()) {
        std::vector<std::size_t> which;
        for (int k = 0; k < 3; ++k) which.push_back(rng.below(p.value.numel()));
        const auto num = numeric_grad(p.value, [&] { return bce_dice_loss(model.forward(x), mask).loss; }, which);
        const auto ana = pick(p.grad.data(), which);
        analytic.insert(analytic.end(), ana.begin(), ana.end());
        numeric.insert(numeric.end(), num.begin(), num.end());
    }
    const double e2e = relative_error(analytic, numeric);
    o.require(analytic.size() >= 50, "only " + std::to_string(analytic.size()) + " parameters sampled");
    o.require(e2e < 1e-4, "end-to-end relative error " + fmt("%.2e", e2e));
    o.note("worst layer rel err " + fmt("%.1e", worst) + "; end-to-end " + fmt("%.1e", e2e) + " over " +
           std::to_string(analytic.size()) + " params (16x16 input)");
    return o;
}

// ---- 3 ----

Outcome dsgd_equivalence() {
    Outcome o;
    const auto data = synth(40, 16, 91);
    UNet sgd(grad_model(92)), dsgd(grad_model(92));
    Sgd o1, o2;
    DsgdGroup group(dsgd, 4);
    CommLedger ledger;
    const auto order = shuffled_indices(data.size(), 93);
    for (std::size_t step = 0; step < 5; ++step) {
        const std::span<const std::size_t> batch(order.data() + 8 * step, 8);
        run_sgd_step(sgd, o1, data, batch, 0.05);
        group.step(dsgd, o2, data, batch, 0.05, ledger);
    }
    const double d = max_abs_diff(sgd.params(), dsgd.params());
    const double moved = max_abs_diff(sgd.params(), UNet(grad_model(92)).params());
    o.require(d < 1e-9, "max-abs difference " + fmt("%.2e", d));
    o.require(moved > 1e-6, "parameters did not move");
    o.note("5 steps, 4x2 vs 1x8: max-abs diff " + fmt("%.1e", d) + " (params moved " + fmt("%.1e", moved) + ")");
    return o;
}

// ---- 4 ----

double fedavg_vs_dsgd(const std::vector<std::size_t>& shard_sizes, std::uint64_t seed) {
    std::size_t n = 0;
    for (auto s : shard_sizes) n += s;
    const auto data = synth(n, 16, seed);
    std::vector<std::vector<std::size_t>> shards;
    const auto order = shuffled_indices(n, seed + 1);
    std::size_t pos = 0;
    for (auto s : shard_sizes) {
        shards.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                            order.begin() + static_cast<std::ptrdiff_t>(pos + s));
        pos += s;
    }
    UNet fed(grad_model(seed + 2)), dsgd(grad_model(seed + 2));
    FedAvgGroup group(fed, shard_sizes, SgdConfig{}, *std::max_element(shard_sizes.begin(), shard_sizes.end()));
    const LocalEpoch epoch{0.1, false, shards};
    CommLedger ledger;
    group.round(fed, data, std::span<const LocalEpoch>(&epoch, 1), ledger);
    Sgd opt;
    DsgdGroup workers(dsgd, shard_sizes.size());
    workers.step(dsgd, opt, data, shards, 0.1, ledger);
    return max_abs_diff(fed.params(), dsgd.params());
}

Outcome fedavg_equivalence() {
    Outcome o;
    const double equal = fedavg_vs_dsgd({250, 250, 250, 250}, 101);
    const double unequal = fedavg_vs_dsgd({750, 250}, 111);
    o.require(equal < 1e-9, "equal shards diff " + fmt("%.2e", equal));
    o.require(unequal < 1e-9, "750/250 shards diff " + fmt("%.2e", unequal));
    o.note("250x4 diff " + fmt("%.1e", equal) + ", 750/250 diff " + fmt("%.1e", unequal));
    return o;
}

// ---- 5 ----

Outcome communication_accounting() {
    Outcome o;
    const auto data = synth(24, 16, 121);  // batch 8: 3 steps per epoch
    auto make = [](StrategyKind kind, std::size_t local_epochs) {
        StrategyConfig s;
        s.kind = kind;
        s.workers = s.clients = 4;
        s.local_epochs = local_epochs;
        s.total_epochs = 4;
        s.freeze_epochs = 1;
        s.seed = 122;
        return s;
    };
    ScheduleConfig sched;
    sched.total_epochs = 4;
    const auto runs = {std::pair{make(StrategyKind::sgd, 1), fs::path("sgd")},
                       std::pair{make(StrategyKind::dsgd, 1), fs::path("dsgd")},
                       std::pair{make(StrategyKind::fedavg, 2), fs::path("fedavg")}};
    std::vector<TrainReport> reports;
    std::vector<RunSummary> summaries;
    for (const auto& [s, name] : runs) {
        reports.push_back(train(grad_model(123), s, sched, SgdConfig{}, data, data, g_tmp / "c5" / name));
        summaries.push_back(load_run(g_tmp / "c5" / name));
    }
    const std::uint64_t p = reports[0].param_count;
    const std::uint64_t steps = reports[1].steps_per_epoch * 4;
    o.require(reports[0].ledger.total() == 0, "SGD exchanged bytes");
    o.require(reports[1].ledger.total() == 2 * 4 * p * 4 * steps, "DSGD bytes != 2*4*P*workers*steps");
    o.require(reports[2].ledger.total() == 2 * 4 * p * 4 * 2, "FedAvg bytes != 2*4*P*clients*rounds");

    std::string footer;
    std::istringstream merged(merge_reports(summaries));
    for (std::string line; std::getline(merged, line);)
        if (line.rfind("fedavg-c4-e2,total,", 0) == 0) footer = line;
    const double ratio = std::stod(footer.substr(footer.rfind(',') + 1));
    const double expected = 1.0 / static_cast<double>(reports[1].steps_per_epoch * 2);
    o.require(ratio == expected, "report footer ratio " + fmt("%.17g", ratio));
    o.note("P=" + std::to_string(p) + ", DSGD " + std::to_string(reports[1].ledger.total()) + " B over " +
           std::to_string(steps) + " steps, FedAvg " + std::to_string(reports[2].ledger.total()) +
           " B over 2 rounds; footer ratio " + fmt("%.6g", ratio) + " = 1/(3*2)");
    return o;
}

// ---- 6 ----

Outcome overfit_sanity() {
    Outcome o;
    const fs::path dir = g_tmp / "c6";
    fs::create_directories(dir);
    const fs::path log = dir / "log.txt";
    o.require(run_cli("gen-data --seed 7 --count 16 --size 64 --out '" + (dir / "data").string() + "'", log) == 0,
              "gen-data: " + slurp(log));
    if (!o.pass) return o;
    std::ofstream(dir / "run.json") << R"({
  "seed": 3,
  "out_dir": "run",
  "model": {"input_size": 64, "stage_channels": [4, 4, 8, 8, 8]},
  "strategy": {"kind": "sgd", "global_batch": 2, "total_epochs": 25, "freeze_epochs": 0},
  "schedule": {"lr_init": 0.1, "lr_max": 0.1, "lr_min": 0.001, "warmup_epochs": 0},
  "optimizer": {"momentum": 0.9},
  "data": {"manifest": "data/manifest.csv", "val_manifest": "data/manifest.csv"}
})";
    o.require(run_cli("train --config '" + (dir / "run.json").string() + "'", log) == 0, "train: " + slurp(log));
    if (!o.pass) return o;

    const RunSummary run = load_run(dir / "run");
    const double first = std::stod(run.rows.front()[1]);
    const double last = run.final_train_loss;
    o.require(run.rows.size() == 25, "expected 25 epochs x 8 steps = 200 steps");
    o.require(last < 0.05, "final train loss " + fmt("%.4f", last));
    o.require(last < first, "final loss not below first epoch");

    o.require(run_cli("eval --ckpt '" + (dir / "run" / "last.ckpt").string() + "' --manifest '" +
                          (dir / "data" / "manifest.csv").string() + "'",
                      log) == 0,
              "eval: " + slurp(log));
    if (!o.pass) return o;
    const std::string line = slurp(log);
    const double fscore = std::stod(line.substr(line.find(',') + 1));
    o.require(fscore > 0.95, "train F-score " + fmt("%.4f", fscore));

    // predict on one training image, scored against its mask.
    const fs::path pred = dir / "pred.pgm";
    o.require(run_cli("predict --ckpt '" + (dir / "run" / "best.ckpt").string() + "' --image '" +
                          (dir / "data" / "img_00003.pgm").string() + "' --out '" + pred.string() + "'",
                      log) == 0,
              "predict: " + slurp(log));
    if (!o.pass) return o;
    const double pf = f_score(confusion(read_pgm(pred), read_pgm(dir / "data" / "msk_00003.pgm")));
    o.require(pf > 0.95, "predicted mask F-score " + fmt("%.4f", pf));
    o.note("200 steps: loss " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) + ", train F " +
           fmt("%.4f", fscore) + ", predict F " + fmt("%.4f", pf));
    return o;
}

// ---- 7 ----

bool backbone_equal(const ParamStore& a, const ParamStore& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].group == ParamGroup::backbone && a[i].value != b[i].value) return false;
    return true;
}

Outcome protocol_fidelity() {
    Outcome o;
    const auto data = synth(16, 64, 7);
    UNetConfig mc;
    mc.input_size = 64;
    mc.stage_channels = {4, 4, 8, 8, 8};
    mc.seed = 3;
    StrategyConfig s;
    s.global_batch = 2;
    s.total_epochs = 10;
    s.freeze_epochs = 5;
    s.seed = 3;
    ScheduleConfig sched;
    sched.lr_init = sched.lr_max = 0.1;
    sched.lr_min = 0.001;
    sched.warmup_epochs = 0;
    const UNet initial(mc);
    std::vector<bool> unchanged;
    TrainOptions opts;
    opts.on_epoch_end = [&](const EpochRow&, const UNet& m) {
        unchanged.push_back(backbone_equal(m.params(), initial.params()));
    };
    const auto report = train(mc, s, sched, SgdConfig{}, data, data, g_tmp / "c7", opts);
    o.require(report.rows.size() == 10, std::to_string(report.rows.size()) + " report rows");
    for (std::size_t e = 0; e < unchanged.size(); ++e) {
        if (e < 5) o.require(unchanged[e], "backbone moved during frozen epoch " + std::to_string(e + 1));
    }
    o.require(unchanged.size() >= 6 && !unchanged[5], "backbone unchanged after epoch 6");
    std::size_t argmin = 0;
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        if (report.rows[i].val_loss < report.rows[argmin].val_loss) argmin = i;
    o.require(report.best_epoch == argmin + 1, "best_epoch " + std::to_string(report.best_epoch));
    o.note("backbone bitwise frozen for epochs 1-5, moved at 6; 10 rows; best_epoch " +
           std::to_string(report.best_epoch) + " = argmin val loss");
    return o;
}

// ---- 8 ----

Outcome determinism() {
    Outcome o;
    const auto data = synth(16, 16, 131);
    StrategyConfig s;
    s.kind = StrategyKind::fedavg;
    s.clients = 2;
    s.total_epochs = 4;
    s.local_epochs = 2;
    s.freeze_epochs = 2;
    s.seed = 132;
    ScheduleConfig sched;
    sched.total_epochs = 4;
    sched.lr_init = sched.lr_max = 0.1;
    sched.lr_min = 0.01;
    for (const char* run : {"a", "b"}) train(grad_model(133), s, sched, SgdConfig{}, data, data, g_tmp / "c8" / run);
    const fs::path a = g_tmp / "c8" / "a", b = g_tmp / "c8" / "b";
    o.require(slurp(a / "report.csv") == slurp(b / "report.csv"), "report CSVs differ");
    o.require(slurp(a / "best.ckpt") == slurp(b / "best.ckpt"), "best checkpoints differ");
    save_checkpoint(load_checkpoint(a / "best.ckpt"), g_tmp / "c8" / "resaved.ckpt");
    o.require(slurp(a / "best.ckpt") == slurp(g_tmp / "c8" / "resaved.ckpt"), "save/load/save not byte-identical");
    o.note("two runs byte-identical (report.csv, best.ckpt); checkpoint round-trip byte-identical");
    return o;
}

// ---- 9 ----

Outcome metric_identities() {
    Outcome o;
    Xoshiro256 rng(141);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Confusion c{rng.below(5000), rng.below(5000), rng.below(5000), rng.below(5000)};
        const double j = iou(c);
        if (c.tp + c.fp + c.fn > 0) worst = std::max(worst, std::abs(dice(c) - 2 * j / (1 + j)));
        if (c.tp > 0) worst = std::max(worst, std::abs(f_score(c) - dice(c)));
    }
    o.require(worst <= 1e-12, "identity violated by " + fmt("%.2e", worst));
    const double f = f_score(Confusion{2, 2, 0, 0});  // P = 0.5, R = 1
    o.require(std::abs(f - 2.0 / 3.0) < 1e-12, "F(P=0.5, R=1) = " + fmt("%.6f", f));
    o.note("1000 random counts, worst deviation " + fmt("%.1e", worst) + "; F(0.5, 1) = " + fmt("%.4f", f));
    return o;
}

// ---- 10 ----

Outcome wall_clock_not_reproduced(bool accounting_passed) {
    Outcome o;
    // Timing rows are hardware-bound; the byte ledger is the stand-in. Check
    // that no artifact claims a timing and that the stand-in holds.
    const std::string header = slurp(g_tmp / "c5" / "dsgd" / "report.csv");
    o.require(header.rfind("epoch,train_loss,val_loss,val_fscore,lr,bytes_cum\n", 0) == 0, "unexpected report columns");
    o.require(header.find("time") == std::string::npos, "report carries a timing column");
    o.require(accounting_passed, "communication accounting (criterion 5) failed");
    o.note("wall-clock times not reproduced (hardware-bound); byte accounting of criterion 5 stands in");
    return o;
}

}  // namespace

int main() {
    g_tmp = fs::temp_directory_path() / ("miniseg_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(g_tmp);
    fs::create_directories(g_tmp);

    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> check;
    };
    bool accounting_passed = false;
    const std::vector<Criterion> criteria = {
        {1, "schedule reproduction", schedule_reproduction},
        {2, "gradient integrity", gradient_integrity},
        {3, "DSGD equals large-batch SGD", dsgd_equivalence},
        {4, "FedAvg equals weighted DSGD step", fedavg_equivalence},
        {5, "communication accounting",
         [&] {
             auto r = communication_accounting();
             accounting_passed = r.pass;
             return r;
         }},
        {6, "overfit sanity", overfit_sanity},
        {7, "protocol fidelity", protocol_fidelity},
        {8, "determinism and serialization", determinism},
        {9, "metric identities", metric_identities},
        {10, "wall-clock times", [&] { return wall_clock_not_reproduced(accounting_passed); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        Outcome r;
        try {
            r = c.check();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        failed += !r.pass;
        std::cout << "criterion " << c.id << " " << (r.pass ? "PASS" : "FAIL") << "  " << c.name << ": " << r.detail
                  << std::endl;
    }
    fs::remove_all(g_tmp);
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
