#include <gtest/gtest.h>

#include "miniseg/run_config.hpp"

using namespace miniseg;

namespace {

const char* kMinimal = R"({"data": {"manifest": "d/manifest.csv"}, "out_dir": "runs/a"})";

std::string with(const std::string& extra) {
    return R"({"data": {"manifest": "m.csv"}, "out_dir": "o", )" + extra + "}";
}

std::string error_of(const std::string& text) {
    try {
        parse_run_config(text, "/base");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "<accepted>";
}

}  // namespace

TEST(RunConfig, DefaultsAndPathResolution) {
    const auto cfg = parse_run_config(kMinimal, "/base");
    EXPECT_EQ(cfg.manifest, std::filesystem::path("/base/d/manifest.csv"));
    EXPECT_EQ(cfg.out_dir, std::filesystem::path("/base/runs/a"));
    EXPECT_TRUE(cfg.val_manifest.empty());
    EXPECT_EQ(cfg.val_fraction, 0.1);
    EXPECT_EQ(cfg.threshold, 0.5);
    EXPECT_EQ(cfg.model.input_size, 64u);
    EXPECT_EQ(cfg.strategy.kind, StrategyKind::sgd);
    EXPECT_EQ(cfg.strategy.global_batch, 8u);
    EXPECT_EQ(cfg.schedule.total_epochs, 10u);
    EXPECT_EQ(cfg.schedule.lr_max, 1e-4);
    EXPECT_EQ(cfg.optimizer.momentum, 0.9);
    EXPECT_EQ(cfg.shards, ShardSource::partition);
}

TEST(RunConfig, FullDocument) {
    const auto cfg = parse_run_config(R"({
        "seed": 42, "threshold": 0.4, "out_dir": "/abs/out",
        "model": {"input_size": 32, "stage_channels": [4, 4, 8, 8, 8]},
        "strategy": {"kind": "fedavg", "clients": 2, "local_epochs": 2, "global_batch": 4,
                     "total_epochs": 6, "freeze_epochs": 2},
        "schedule": {"lr_init": 0.1, "lr_max": 0.2, "lr_min": 0.01, "warmup_epochs": 0},
        "optimizer": {"momentum": 0.5, "weight_decay": 1e-4},
        "data": {"manifest": "m.csv", "val_manifest": "v.csv", "shards": "manifest"}
    })", "/cfg");
    EXPECT_EQ(cfg.model.seed, 42u);
    EXPECT_EQ(cfg.strategy.seed, 42u);
    EXPECT_EQ(cfg.model.stage_channels[2], 8u);
    EXPECT_EQ(cfg.strategy.kind, StrategyKind::fedavg);
    EXPECT_EQ(cfg.strategy.local_batch(), 2u);
    EXPECT_EQ(cfg.schedule.total_epochs, 6u);
    EXPECT_EQ(cfg.schedule.warmup_epochs, 0u);
    EXPECT_EQ(cfg.optimizer.weight_decay, 1e-4);
    EXPECT_EQ(cfg.out_dir, std::filesystem::path("/abs/out"));
    EXPECT_EQ(cfg.val_manifest, std::filesystem::path("/cfg/v.csv"));
    EXPECT_EQ(cfg.shards, ShardSource::manifest);
    EXPECT_EQ(cfg.threshold, 0.4);
}

TEST(RunConfig, UnknownKeysAreNamed) {
    EXPECT_NE(error_of(with(R"("epochs": 3)")).find("unknown key 'epochs'"), std::string::npos);
    EXPECT_NE(error_of(with(R"("strategy": {"worker": 3})")).find("unknown key 'strategy.worker'"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"data": {"manifest": "m", "clients": 1}, "out_dir": "o"})").find("'data.clients'"),
              std::string::npos);
}

TEST(RunConfig, MissingRequiredKeys) {
    EXPECT_NE(error_of(R"({"out_dir": "o"})").find("'data'"), std::string::npos);
    EXPECT_NE(error_of(R"({"data": {}, "out_dir": "o"})").find("data.manifest"), std::string::npos);
    EXPECT_NE(error_of(R"({"data": {"manifest": "m"}})").find("out_dir"), std::string::npos);
}

TEST(RunConfig, TypeAndRangeErrors) {
    EXPECT_NE(error_of(with(R"("seed": -1)")).find("seed"), std::string::npos);
    EXPECT_NE(error_of(with(R"("strategy": {"kind": "adam"})")).find("strategy.kind"), std::string::npos);
    EXPECT_NE(error_of(with(R"("strategy": {"workers": "4"})")).find("strategy.workers"), std::string::npos);
    EXPECT_NE(error_of(with(R"("model": {"stage_channels": [1, 2, 3]})")).find("stage_channels"),
              std::string::npos);
    EXPECT_NE(error_of(with(R"("threshold": 2)")).find("threshold"), std::string::npos);
    EXPECT_NE(error_of(with(R"("strategy": {"kind": "dsgd", "workers": 3})")).find("divisible"),
              std::string::npos);
    EXPECT_NE(error_of(with(R"("schedule": {"lr_min": 1})")).find("lr"), std::string::npos);
    EXPECT_NE(error_of(with(R"("model": {"input_size": 50})")).find("input_size"), std::string::npos);
    EXPECT_NE(error_of("[1, 2]").find("JSON object"), std::string::npos);
    EXPECT_NE(error_of("{not json").find("not valid JSON"), std::string::npos);
}

TEST(RunConfig, MissingFileIsNotAConfigError) {
    EXPECT_THROW(load_run_config("/nonexistent/run.json"), std::runtime_error);
}
