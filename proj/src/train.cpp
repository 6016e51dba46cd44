#include "miniseg/train.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "miniseg/checkpoint.hpp"
#include "miniseg/error.hpp"
#include "miniseg/rng.hpp"

namespace miniseg {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEpochOrderStream = 0x65706f6368;  // "epoch"

Tensor gather(const std::vector<Sample>& data, std::span<const std::size_t> indices, bool masks) {
    std::vector<const Tensor*> parts;
    parts.reserve(indices.size());
    for (auto i : indices) parts.push_back(masks ? &data.at(i).mask : &data.at(i).image);
    return stack_batch(parts);
}

// Splits [0, n) into k contiguous chunks whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> split_contiguous(std::span<const std::size_t> items,
                                                       std::size_t k) {
    std::vector<std::vector<std::size_t>> out(k);
    const std::size_t base = items.size() / k;
    const std::size_t extra = items.size() % k;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t len = base + (i < extra ? 1 : 0);
        out[i].assign(items.begin() + static_cast<std::ptrdiff_t>(pos),
                      items.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return out;
}

void sync_replica(UNet& replica, const UNet& source) {
    auto& dst = replica.params();
    const auto& src = source.params();
    dst.copy_values_from(src);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].frozen = src[i].frozen;
    dst.zero_grad();
}

void check_structures(std::span<const ParamStore* const> parts, std::span<const std::size_t> sizes,
                      const ParamStore& target, const char* op) {
    if (parts.empty()) throw std::invalid_argument(std::string(op) + ": no participants");
    if (parts.size() != sizes.size()) {
        throw std::invalid_argument(std::string(op) + ": " + std::to_string(parts.size()) +
                                    " participants but " + std::to_string(sizes.size()) + " sizes");
    }
    for (std::size_t k = 0; k < parts.size(); ++k) {
        if (!parts[k]->same_structure(target)) {
            throw std::invalid_argument(std::string(op) + ": participant " + std::to_string(k) +
                                        " has a different parameter structure");
        }
    }
}

void aggregate_into(std::span<const ParamStore* const> parts, std::span<const std::size_t> sizes,
                    ParamStore& target, bool grads) {
    std::vector<std::span<const double>> views(parts.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const Param& p = (*parts[k])[i];
            views[k] = grads ? p.grad.data() : p.value.data();
        }
        const auto mean = weighted_mean(views, sizes);
        Tensor& dst = grads ? target[i].grad : target[i].value;
        std::copy(mean.begin(), mean.end(), dst.data().begin());
    }
}

void log_line(std::ostream* log, const std::string& s) {
    if (log) *log << s << '\n' << std::flush;
}

}  // namespace

std::string_view to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::sgd: return "sgd";
        case StrategyKind::dsgd: return "dsgd";
        case StrategyKind::fedavg: return "fedavg";
    }
    return "?";
}

void StrategyConfig::validate() const {
    if (global_batch == 0) throw std::invalid_argument("global_batch must be >= 1");
    if (total_epochs == 0) throw std::invalid_argument("total_epochs must be >= 1");
    if (freeze_epochs > total_epochs) throw std::invalid_argument("freeze_epochs must be <= total_epochs");
    switch (kind) {
        case StrategyKind::sgd: break;
        case StrategyKind::dsgd:
            if (workers == 0) throw std::invalid_argument("workers must be >= 1");
            if (global_batch % workers != 0) {
                throw std::invalid_argument("global_batch (" + std::to_string(global_batch) +
                                            ") must be divisible by workers (" + std::to_string(workers) + ")");
            }
            break;
        case StrategyKind::fedavg:
            if (clients == 0) throw std::invalid_argument("clients must be >= 1");
            if (local_epochs == 0) throw std::invalid_argument("local_epochs must be >= 1");
            if (global_batch % clients != 0) {
                throw std::invalid_argument("global_batch (" + std::to_string(global_batch) +
                                            ") must be divisible by clients (" + std::to_string(clients) + ")");
            }
            if (total_epochs % local_epochs != 0) {
                throw std::invalid_argument("total_epochs (" + std::to_string(total_epochs) +
                                            ") must be a multiple of local_epochs (" +
                                            std::to_string(local_epochs) + ")");
            }
            break;
    }
}

std::size_t StrategyConfig::participants() const noexcept {
    switch (kind) {
        case StrategyKind::dsgd: return workers;
        case StrategyKind::fedavg: return clients;
        default: return 1;
    }
}

std::size_t StrategyConfig::local_batch() const noexcept { return global_batch / participants(); }

std::string StrategyConfig::label() const {
    switch (kind) {
        case StrategyKind::dsgd: return "dsgd-w" + std::to_string(workers);
        case StrategyKind::fedavg:
            return "fedavg-c" + std::to_string(clients) + "-e" + std::to_string(local_epochs);
        default: return "sgd";
    }
}

void CommLedger::record_sync(std::size_t param_count, std::size_t participants) noexcept {
    const std::uint64_t per_direction = kWireBytesPerParam * param_count * participants;
    bytes_up += per_direction;
    bytes_down += per_direction;
    ++sync_events;
}

std::vector<double> weighted_mean(std::span<const std::span<const double>> parts,
                                  std::span<const std::size_t> sizes) {
    if (parts.empty() || parts.size() != sizes.size()) {
        throw std::invalid_argument("weighted_mean: need one size per part");
    }
    std::size_t n = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        if (parts[k].size() != parts[0].size()) throw std::invalid_argument("weighted_mean: length mismatch");
        n += sizes[k];
    }
    if (n == 0) throw std::invalid_argument("weighted_mean: total size is zero");
    std::vector<double> out(parts[0].begin(), parts[0].end());
    const double total = static_cast<double>(n);
    for (std::size_t k = 1; k < parts.size(); ++k) {
        const double w = static_cast<double>(sizes[k]) / total;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * (parts[k][i] - parts[0][i]);
    }
    return out;
}

void dsgd_aggregate(std::span<const ParamStore* const> workers, std::span<const std::size_t> shard_sizes,
                    ParamStore& target) {
    check_structures(workers, shard_sizes, target, "dsgd_aggregate");
    aggregate_into(workers, shard_sizes, target, true);
}

void fedavg_aggregate(std::span<const ParamStore* const> clients,
                      std::span<const std::size_t> client_sizes, ParamStore& target) {
    check_structures(clients, client_sizes, target, "fedavg_aggregate");
    for (auto s : client_sizes) {
        if (s == 0) throw std::invalid_argument("fedavg_aggregate: client sizes must be positive");
    }
    aggregate_into(clients, client_sizes, target, false);
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t n_threads = std::min(threads, count);
    std::vector<std::exception_ptr> errors(count);
    {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < count; i += n_threads) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

double accumulate_gradients(UNet& model, const std::vector<Sample>& data,
                            std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("accumulate_gradients: empty batch");
    const Tensor probs = model.forward(gather(data, indices, false));
    auto loss = bce_dice_loss(probs, gather(data, indices, true));
    model.backward(loss.dpred);
    return loss.loss;
}

double run_sgd_step(UNet& model, Sgd& opt, const std::vector<Sample>& data,
                    std::span<const std::size_t> batch, double lr) {
    model.params().zero_grad();
    const double loss = accumulate_gradients(model, data, batch);
    opt.step(model.params(), lr);
    return loss;
}

// ---------------------------------------------------------------------------
// DSGD

DsgdGroup::DsgdGroup(const UNet& shared, std::size_t workers, std::size_t threads)
    : replicas_(workers, shared), threads_(threads) {
    if (workers == 0) throw std::invalid_argument("DsgdGroup: workers must be >= 1");
}

double DsgdGroup::step(UNet& shared, Sgd& opt, const std::vector<Sample>& data,
                       std::span<const std::size_t> batch, double lr, CommLedger& ledger) {
    const auto micro = split_contiguous(batch, replicas_.size());
    return step(shared, opt, data, micro, lr, ledger);
}

double DsgdGroup::step(UNet& shared, Sgd& opt, const std::vector<Sample>& data,
                       std::span<const std::vector<std::size_t>> micro_batches, double lr,
                       CommLedger& ledger) {
    if (micro_batches.size() != replicas_.size()) {
        throw std::invalid_argument("DsgdGroup::step: expected one micro-batch per worker");
    }
    std::vector<double> losses(replicas_.size(), 0.0);
    std::vector<std::size_t> sizes(replicas_.size());
    parallel_for(replicas_.size(), threads_, [&](std::size_t k) {
        sync_replica(replicas_[k], shared);
        sizes[k] = micro_batches[k].size();
        if (sizes[k] > 0) losses[k] = accumulate_gradients(replicas_[k], data, micro_batches[k]);
    });

    // Barrier passed: single reducer, worker-index order.
    std::vector<const ParamStore*> grads;
    grads.reserve(replicas_.size());
    for (const auto& r : replicas_) grads.push_back(&r.params());
    dsgd_aggregate(grads, sizes, shared.params());
    opt.step(shared.params(), lr);
    ledger.record_sync(shared.params().scalar_count(), replicas_.size());

    std::size_t n = 0;
    double loss = 0.0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        n += sizes[k];
        loss += static_cast<double>(sizes[k]) * losses[k];
    }
    return n > 0 ? loss / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// FedAvg

FedAvgGroup::FedAvgGroup(const UNet& global, std::vector<std::size_t> client_sizes, SgdConfig opt,
                         std::size_t local_batch, std::size_t threads)
    : replicas_(client_sizes.size(), global),
      sizes_(std::move(client_sizes)),
      opt_(opt),
      local_batch_(local_batch),
      threads_(threads) {
    if (sizes_.empty()) throw std::invalid_argument("FedAvgGroup: at least one client required");
    if (local_batch_ == 0) throw std::invalid_argument("FedAvgGroup: local_batch must be >= 1");
    opt_.validate();
}

std::vector<double> FedAvgGroup::round(UNet& global, const std::vector<Sample>& data,
                                       std::span<const LocalEpoch> epochs, CommLedger& ledger) {
    if (epochs.empty()) throw std::invalid_argument("FedAvgGroup::round: no local epochs");
    for (const auto& e : epochs) {
        if (e.client_orders.size() != replicas_.size()) {
            throw std::invalid_argument("FedAvgGroup::round: expected one order per client");
        }
    }
    // loss_sums[k][e]: sum over client k's batches of batch_size * batch_loss.
    std::vector<std::vector<double>> loss_sums(replicas_.size(), std::vector<double>(epochs.size(), 0.0));
    std::vector<std::vector<std::size_t>> seen(replicas_.size(), std::vector<std::size_t>(epochs.size(), 0));

    parallel_for(replicas_.size(), threads_, [&](std::size_t k) {
        UNet& local = replicas_[k];
        sync_replica(local, global);
        Sgd opt(opt_);
        for (std::size_t e = 0; e < epochs.size(); ++e) {
            local.set_backbone_frozen(epochs[e].freeze_backbone);
            const auto& order = epochs[e].client_orders[k];
            for (std::size_t pos = 0; pos < order.size(); pos += local_batch_) {
                const std::size_t len = std::min(local_batch_, order.size() - pos);
                const std::span<const std::size_t> batch(order.data() + pos, len);
                loss_sums[k][e] += static_cast<double>(len) * run_sgd_step(local, opt, data, batch, epochs[e].lr);
                seen[k][e] += len;
            }
        }
    });

    std::vector<const ParamStore*> weights;
    weights.reserve(replicas_.size());
    for (const auto& r : replicas_) weights.push_back(&r.params());
    fedavg_aggregate(weights, sizes_, global.params());
    ledger.record_sync(global.params().scalar_count(), replicas_.size());

    std::vector<double> out(epochs.size(), 0.0);
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t k = 0; k < replicas_.size(); ++k) {
            sum += loss_sums[k][e];
            n += seen[k][e];
        }
        out[e] = n > 0 ? sum / static_cast<double>(n) : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation and the training protocol

EvalResult evaluate(UNet& model, const std::vector<Sample>& data, std::size_t batch, double threshold) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty data set");
    if (batch == 0) throw std::invalid_argument("evaluate: batch must be >= 1");
    EvalResult r;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += batch) {
        idx.clear();
        for (std::size_t i = start; i < std::min(start + batch, data.size()); ++i) idx.push_back(i);
        const Tensor probs = model.forward(gather(data, idx, false));
        const Tensor masks = gather(data, idx, true);
        r.loss += static_cast<double>(idx.size()) * bce_dice_loss(probs, masks).loss;
        r.counts += confusion(probs, masks, threshold);
    }
    r.loss /= static_cast<double>(data.size());
    return r;
}

namespace {

class Protocol {
public:
    Protocol(const UNetConfig& model_cfg, const StrategyConfig& strategy, const ScheduleConfig& sched,
             const SgdConfig& opt, const std::vector<Sample>& train_set,
             const std::vector<Sample>& val_set, const fs::path& out_dir, const TrainOptions& options)
        : strategy_(strategy),
          sched_(sched),
          opt_cfg_(opt),
          train_(train_set),
          val_(val_set),
          out_dir_(out_dir),
          options_(options),
          model_(model_cfg) {
        report_.strategy = strategy.label();
        report_.param_count = model_.params().scalar_count();
        report_.steps_per_epoch = (train_.size() + strategy.global_batch - 1) / strategy.global_batch;
        report_.best_checkpoint_path = out_dir_ / "best.ckpt";
    }

    TrainReport run() {
        std::error_code ec;
        fs::create_directories(out_dir_, ec);
        if (ec || !fs::is_directory(out_dir_)) throw IoError("cannot create output directory", out_dir_);

        log_line(options_.log, "strategy " + report_.strategy + ", " + std::to_string(train_.size()) +
                                   " training / " + std::to_string(val_.size()) + " validation samples, " +
                                   std::to_string(report_.param_count) + " parameters");
        switch (strategy_.kind) {
            case StrategyKind::sgd:
            case StrategyKind::dsgd: run_synchronous(); break;
            case StrategyKind::fedavg: run_federated(); break;
        }
        save_checkpoint(model_, out_dir_ / "last.ckpt");
        write_report_csv(report_, out_dir_ / "report.csv");
        write_summary_json(report_, strategy_, out_dir_ / "summary.json");
        return report_;
    }

private:
    std::vector<std::size_t> epoch_order(std::size_t epoch) const {
        return shuffled_indices(train_.size(), derive_seed(derive_seed(strategy_.seed, kEpochOrderStream), epoch));
    }

    bool frozen_in(std::size_t epoch) const { return epoch <= strategy_.freeze_epochs; }

    void run_synchronous() {
        Sgd opt(opt_cfg_);
        std::optional<DsgdGroup> group;
        if (strategy_.kind == StrategyKind::dsgd) {
            group.emplace(model_, strategy_.workers, options_.threads);
        }
        for (std::size_t epoch = 1; epoch <= strategy_.total_epochs; ++epoch) {
            model_.set_backbone_frozen(frozen_in(epoch));
            const double lr = lr_at_epoch(epoch, sched_);
            const auto order = epoch_order(epoch);
            double loss_sum = 0.0;
            for (std::size_t pos = 0; pos < order.size(); pos += strategy_.global_batch) {
                const std::size_t len = std::min(strategy_.global_batch, order.size() - pos);
                const std::span<const std::size_t> batch(order.data() + pos, len);
                const double loss = group ? group->step(model_, opt, train_, batch, lr, report_.ledger)
                                          : run_sgd_step(model_, opt, train_, batch, lr);
                loss_sum += static_cast<double>(len) * loss;
            }
            finish_epoch(epoch, loss_sum / static_cast<double>(train_.size()), lr);
        }
    }

    void run_federated() {
        std::vector<std::size_t> assignment = options_.client_assignment;
        if (assignment.empty()) {
            assignment = partition(train_.size(), strategy_.clients, strategy_.seed);
        } else if (assignment.size() != train_.size()) {
            throw std::invalid_argument("client assignment covers " + std::to_string(assignment.size()) +
                                        " samples, training set has " + std::to_string(train_.size()));
        }
        std::vector<std::size_t> sizes(strategy_.clients, 0);
        for (auto c : assignment) {
            if (c >= strategy_.clients) {
                throw std::invalid_argument("client id " + std::to_string(c) + " >= clients (" +
                                            std::to_string(strategy_.clients) + ")");
            }
            ++sizes[c];
        }
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            if (sizes[c] == 0) throw std::invalid_argument("client " + std::to_string(c) + " has no samples");
        }
        report_.shard_sizes = sizes;
        std::string shard_line = "shard sizes:";
        for (std::size_t c = 0; c < sizes.size(); ++c) shard_line += (c ? "/" : " ") + std::to_string(sizes[c]);
        log_line(options_.log, shard_line);

        FedAvgGroup group(model_, sizes, opt_cfg_, strategy_.local_batch(), options_.threads);
        for (std::size_t first = 1; first <= strategy_.total_epochs; first += strategy_.local_epochs) {
            std::vector<LocalEpoch> plan;
            for (std::size_t epoch = first; epoch < first + strategy_.local_epochs; ++epoch) {
                LocalEpoch le;
                le.lr = lr_at_epoch(epoch, sched_);
                le.freeze_backbone = frozen_in(epoch);
                le.client_orders.resize(strategy_.clients);
                for (auto i : epoch_order(epoch)) le.client_orders[assignment[i]].push_back(i);
                plan.push_back(std::move(le));
            }
            // The server model does not change until the round completes, so the
            // intermediate epochs of a round are validated on the previous
            // global weights and carry the previous byte count.
            const auto losses = group.round(pending_global(), train_, plan, pending_ledger());
            for (std::size_t e = 0; e + 1 < plan.size(); ++e) finish_epoch(first + e, losses[e], plan[e].lr);
            commit_round();
            finish_epoch(first + plan.size() - 1, losses.back(), plan.back().lr);
        }
    }

    // The round aggregates into a staging copy so intermediate rows still see
    // the pre-round global model.
    UNet& pending_global() {
        staged_model_.emplace(model_);
        return *staged_model_;
    }
    CommLedger& pending_ledger() {
        staged_ledger_ = report_.ledger;
        return staged_ledger_;
    }
    void commit_round() {
        model_ = std::move(*staged_model_);
        staged_model_.reset();
        report_.ledger = staged_ledger_;
    }

    void finish_epoch(std::size_t epoch, double train_loss, double lr) {
        const auto eval = evaluate(model_, val_, strategy_.global_batch, options_.threshold);
        EpochRow row{epoch, train_loss, eval.loss, f_score(eval.counts), lr, report_.ledger.total()};
        report_.rows.push_back(row);
        if (report_.best_epoch == 0 || row.val_loss < best_loss_) {
            best_loss_ = row.val_loss;
            report_.best_epoch = epoch;
            save_checkpoint(model_, report_.best_checkpoint_path);
        }
        log_line(options_.log, "epoch " + std::to_string(epoch) + " train_loss " + format_double(row.train_loss) +
                                   " val_loss " + format_double(row.val_loss) + " val_fscore " +
                                   format_double(row.val_fscore) + " lr " + format_double(lr) + " bytes " +
                                   std::to_string(row.bytes_cum));
        if (options_.on_epoch_end) options_.on_epoch_end(row, model_);
    }

    const StrategyConfig& strategy_;
    const ScheduleConfig& sched_;
    const SgdConfig& opt_cfg_;
    const std::vector<Sample>& train_;
    const std::vector<Sample>& val_;
    fs::path out_dir_;
    const TrainOptions& options_;
    UNet model_;
    std::optional<UNet> staged_model_;
    CommLedger staged_ledger_;
    TrainReport report_;
    double best_loss_ = std::numeric_limits<double>::infinity();
};

}  // namespace

TrainReport train(const UNetConfig& model_cfg, const StrategyConfig& strategy, const ScheduleConfig& sched,
                  const SgdConfig& opt, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const fs::path& out_dir, const TrainOptions& options) {
    model_cfg.validate();
    strategy.validate();
    sched.validate();
    opt.validate();
    if (sched.total_epochs != strategy.total_epochs) {
        throw std::invalid_argument("schedule total_epochs (" + std::to_string(sched.total_epochs) +
                                    ") differs from strategy total_epochs (" +
                                    std::to_string(strategy.total_epochs) + ")");
    }
    if (train_set.empty()) throw std::invalid_argument("training set is empty");
    if (val_set.empty()) throw std::invalid_argument("validation set is empty");
    if (strategy.kind == StrategyKind::fedavg && strategy.clients > train_set.size()) {
        throw std::invalid_argument("more clients than training samples");
    }
    for (const auto* set : {&train_set, &val_set}) {
        for (const auto& s : *set) {
            const Shape& sh = s.image.shape();
            if (sh.c != model_cfg.in_channels || sh.h != model_cfg.input_size || sh.w != model_cfg.input_size ||
                s.mask.shape().c != model_cfg.out_channels) {
                throw std::invalid_argument("sample of shape " + to_string(sh) + " does not fit a model with input " +
                                            std::to_string(model_cfg.input_size) + "x" +
                                            std::to_string(model_cfg.input_size));
            }
        }
    }
    return Protocol(model_cfg, strategy, sched, opt, train_set, val_set, out_dir, options).run();
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_report_csv(const TrainReport& report, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", path);
    out << "epoch,train_loss,val_loss,val_fscore,lr,bytes_cum\n";
    for (const auto& r : report.rows) {
        out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss) << ','
            << format_double(r.val_fscore) << ',' << format_double(r.lr) << ',' << r.bytes_cum << '\n';
    }
    if (!out) throw IoError("write failed", path);
}

void write_summary_json(const TrainReport& report, const StrategyConfig& strategy, const fs::path& path) {
    nlohmann::ordered_json j;
    j["strategy"] = report.strategy;
    j["kind"] = std::string(to_string(strategy.kind));
    j["participants"] = strategy.participants();
    j["local_epochs"] = strategy.kind == StrategyKind::fedavg ? strategy.local_epochs : 1;
    j["steps_per_epoch"] = report.steps_per_epoch;
    j["param_count"] = report.param_count;
    j["best_epoch"] = report.best_epoch;
    j["bytes_up"] = report.ledger.bytes_up;
    j["bytes_down"] = report.ledger.bytes_down;
    j["sync_events"] = report.ledger.sync_events;
    j["shard_sizes"] = report.shard_sizes;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed", path);
}

}  // namespace miniseg
