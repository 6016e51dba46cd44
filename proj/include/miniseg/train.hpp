#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "miniseg/data.hpp"
#include "miniseg/metrics.hpp"
#include "miniseg/optim.hpp"
#include "miniseg/unet.hpp"

namespace miniseg {

enum class StrategyKind { sgd, dsgd, fedavg };

std::string_view to_string(StrategyKind k);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::sgd;
    std::size_t workers = 4;       // dsgd
    std::size_t clients = 4;       // fedavg
    std::size_t local_epochs = 1;  // fedavg: epochs per communication round
    std::size_t global_batch = 8;
    std::size_t total_epochs = 10;
    std::size_t freeze_epochs = 5;
    std::uint64_t seed = 0;

    void validate() const;
    // Number of parties exchanging parameters at each synchronization.
    std::size_t participants() const noexcept;
    // Per-party batch: global_batch / workers (dsgd), global_batch / clients (fedavg).
    std::size_t local_batch() const noexcept;
    // "sgd", "dsgd-w4", "fedavg-c4-e1".
    std::string label() const;
};

inline constexpr std::uint64_t kWireBytesPerParam = 4;

// Bytes on the simulated wire. Each synchronization moves P parameters up
// and P down per participant.
struct CommLedger {
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    std::uint64_t sync_events = 0;

    std::uint64_t total() const noexcept { return bytes_up + bytes_down; }
    void record_sync(std::size_t param_count, std::size_t participants) noexcept;
    bool operator==(const CommLedger&) const = default;
};

struct EpochRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_fscore = 0.0;
    double lr = 0.0;
    std::uint64_t bytes_cum = 0;
};

struct TrainReport {
    std::string strategy;
    std::vector<EpochRow> rows;
    std::size_t best_epoch = 0;
    std::filesystem::path best_checkpoint_path;
    CommLedger ledger;
    std::size_t steps_per_epoch = 0;
    std::size_t param_count = 0;
    std::vector<std::size_t> shard_sizes;
};

// Weighted mean sum_k (n_k / n) * parts[k], reduced in index order. Summed
// as offsets from parts[0], so identical inputs reproduce it exactly and a
// single part is returned bitwise.
std::vector<double> weighted_mean(std::span<const std::span<const double>> parts,
                                  std::span<const std::size_t> sizes);

// Writes the weighted mean of the workers' gradients into target's grads.
void dsgd_aggregate(std::span<const ParamStore* const> workers, std::span<const std::size_t> shard_sizes,
                    ParamStore& target);
// Writes the weighted mean of the clients' parameter values into target.
void fedavg_aggregate(std::span<const ParamStore* const> clients,
                      std::span<const std::size_t> client_sizes, ParamStore& target);

// Runs fn(i) for i in [0, count). threads == 0 runs sequentially in index
// order; otherwise up to `threads` std::threads share the indices.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

// Forward + loss + backward for the listed samples; grads accumulate into the
// model. Returns the batch loss (mean over samples).
double accumulate_gradients(UNet& model, const std::vector<Sample>& data,
                            std::span<const std::size_t> indices);

// One single-worker step. Returns the batch loss.
double run_sgd_step(UNet& model, Sgd& opt, const std::vector<Sample>& data,
                    std::span<const std::size_t> batch, double lr);

// Simulated synchronous data-parallel group. Worker replicas compute
// gradients on contiguous micro-batches of the global batch; the weighted
// mean drives one update of the shared model.
class DsgdGroup {
public:
    DsgdGroup(const UNet& shared, std::size_t workers, std::size_t threads = 0);

    std::size_t workers() const noexcept { return replicas_.size(); }

    // Splits batch into `workers` contiguous micro-batches (sizes differ by at
    // most one), aggregates, steps `shared`, charges the ledger. Returns the
    // global batch loss.
    double step(UNet& shared, Sgd& opt, const std::vector<Sample>& data,
                std::span<const std::size_t> batch, double lr, CommLedger& ledger);

    // Same, with caller-chosen micro-batches (one per worker, weights n_k / n).
    double step(UNet& shared, Sgd& opt, const std::vector<Sample>& data,
                std::span<const std::vector<std::size_t>> micro_batches, double lr,
                CommLedger& ledger);

private:
    std::vector<UNet> replicas_;
    std::size_t threads_;
};

// One local epoch of every client inside a federated round.
struct LocalEpoch {
    double lr = 0.0;
    bool freeze_backbone = false;
    // Per client, the order in which it visits its shard.
    std::vector<std::vector<std::size_t>> client_orders;
};

// Simulated federated-averaging group. Each round: clients start from the
// global model with fresh momentum, run their local epochs, then the server
// replaces the global model with the size-weighted mean of client weights.
class FedAvgGroup {
public:
    FedAvgGroup(const UNet& global, std::vector<std::size_t> client_sizes, SgdConfig opt,
                std::size_t local_batch, std::size_t threads = 0);

    std::size_t clients() const noexcept { return replicas_.size(); }
    const std::vector<std::size_t>& client_sizes() const noexcept { return sizes_; }

    // Returns, per local epoch, the sample-weighted mean training loss over
    // all clients. Charges one synchronization to the ledger.
    std::vector<double> round(UNet& global, const std::vector<Sample>& data,
                              std::span<const LocalEpoch> epochs, CommLedger& ledger);

private:
    std::vector<UNet> replicas_;
    std::vector<std::size_t> sizes_;
    SgdConfig opt_;
    std::size_t local_batch_;
    std::size_t threads_;
};

struct EvalResult {
    double loss = 0.0;
    Confusion counts;
};

// Micro-averaged over all pixels; loss is the sample-weighted batch mean.
EvalResult evaluate(UNet& model, const std::vector<Sample>& data, std::size_t batch,
                    double threshold = 0.5);

struct TrainOptions {
    double threshold = 0.5;
    std::size_t threads = 0;
    // FedAvg shard per training sample. Empty: partition(n, clients, seed).
    std::vector<std::size_t> client_assignment;
    std::ostream* log = nullptr;
    std::function<void(const EpochRow&, const UNet&)> on_epoch_end;
};

// Full protocol: backbone frozen for epochs 1..freeze_epochs, per-epoch
// validation, best (lowest val loss, earliest on ties) weights kept in
// out_dir/best.ckpt, final weights in out_dir/last.ckpt, report.csv and
// summary.json written to out_dir. sched.total_epochs must equal
// strategy.total_epochs.
TrainReport train(const UNetConfig& model_cfg, const StrategyConfig& strategy,
                  const ScheduleConfig& sched, const SgdConfig& opt, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});

// CSV header: epoch,train_loss,val_loss,val_fscore,lr,bytes_cum
void write_report_csv(const TrainReport& report, const std::filesystem::path& path);
void write_summary_json(const TrainReport& report, const StrategyConfig& strategy,
                        const std::filesystem::path& path);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace miniseg
