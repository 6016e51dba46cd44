#pragma once

// Merges per-run training reports into one comparison table.
//
// Output columns (fixed order):
//   strategy,row,epoch,train_loss,val_loss,val_fscore,lr,bytes_cum,sync_events,bytes_ratio
//
// Each run contributes its report rows verbatim (row = "epoch"; sync_events
// and bytes_ratio empty) followed by one footer (row = "total"): last epoch,
// final train and val loss, best val F-score, total bytes, total sync events,
// and total bytes divided by those of the first listed run that exchanged
// any bytes (empty when no run did).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace miniseg {

struct RunSummary {
    std::filesystem::path dir;
    std::string strategy;
    std::vector<std::vector<std::string>> rows;  // six report.csv fields per row
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
    double best_fscore = 0.0;
    std::size_t last_epoch = 0;
    std::uint64_t total_bytes = 0;
    std::uint64_t sync_events = 0;
};

// Reads <dir>/report.csv and <dir>/summary.json. Malformed input throws
// std::invalid_argument naming the file and line.
RunSummary load_run(const std::filesystem::path& dir);

std::string merge_reports(const std::vector<RunSummary>& runs);

}  // namespace miniseg
