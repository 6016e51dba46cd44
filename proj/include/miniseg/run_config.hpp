#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "miniseg/optim.hpp"
#include "miniseg/train.hpp"
#include "miniseg/unet.hpp"

namespace miniseg {

// Rejected run configuration; the message names the offending key.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class ShardSource { partition, manifest };

// JSON run description. Keys and defaults:
//
//   seed                   0        model init, shuffles, partition and split
//   out_dir                (required)
//   threshold              0.5
//   model.input_size       64
//   model.stage_channels   [16, 32, 64, 128, 128]
//   model.in_channels      1
//   model.out_channels     1
//   strategy.kind          "sgd" | "dsgd" | "fedavg"   ("sgd")
//   strategy.workers       4        dsgd only
//   strategy.clients       4        fedavg only
//   strategy.local_epochs  1        fedavg only
//   strategy.global_batch  8
//   strategy.total_epochs  10
//   strategy.freeze_epochs 5
//   schedule.lr_init       1e-5
//   schedule.lr_max        1e-4
//   schedule.lr_min        1e-6
//   schedule.warmup_epochs 1
//   optimizer.momentum     0.9
//   optimizer.weight_decay 0
//   data.manifest          (required)
//   data.val_manifest      absent: split data.manifest by val_fraction
//   data.val_fraction      0.1
//   data.shards            "partition" | "manifest"  ("partition"); with
//                          "manifest" the client column assigns FedAvg shards
//
// Relative paths resolve against the directory holding the config file.
// Unknown keys are rejected.
struct RunConfig {
    UNetConfig model;
    StrategyConfig strategy;
    ScheduleConfig schedule;
    SgdConfig optimizer;
    double threshold = 0.5;
    std::filesystem::path manifest;
    std::filesystem::path val_manifest;  // empty: split
    double val_fraction = 0.1;
    ShardSource shards = ShardSource::partition;
    std::filesystem::path out_dir;
};

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace miniseg
