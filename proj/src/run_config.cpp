#include "miniseg/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "miniseg/error.hpp"

namespace miniseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError((where.empty() ? "config" : where) + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.count(key)) {
            throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string path = where.empty() ? key : where + "." + key;
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!it->is_number_unsigned()) throw ConfigError(path + " must be a non-negative integer");
        } else if constexpr (std::is_same_v<T, double>) {
            if (!it->is_number()) throw ConfigError(path + " must be a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) throw ConfigError(path + " must be a string");
        }
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(root, "", {"seed", "out_dir", "threshold", "model", "strategy", "schedule", "optimizer", "data"});

    RunConfig cfg;
    std::uint64_t seed = 0;
    read(root, "seed", "", seed);
    read(root, "threshold", "", cfg.threshold);
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) throw ConfigError("threshold must be in [0, 1]");

    if (root.contains("model")) {
        const auto& m = root["model"];
        reject_unknown(m, "model", {"input_size", "stage_channels", "in_channels", "out_channels"});
        read(m, "input_size", "model", cfg.model.input_size);
        read(m, "in_channels", "model", cfg.model.in_channels);
        read(m, "out_channels", "model", cfg.model.out_channels);
        if (m.contains("stage_channels")) {
            const auto& sc = m["stage_channels"];
            if (!sc.is_array() || sc.size() != 5) {
                throw ConfigError("model.stage_channels must be an array of exactly 5 counts");
            }
            for (std::size_t i = 0; i < 5; ++i) {
                if (!sc[i].is_number_unsigned()) throw ConfigError("model.stage_channels entries must be integers");
                cfg.model.stage_channels[i] = sc[i].get<std::size_t>();
            }
        }
    }
    cfg.model.seed = seed;

    if (root.contains("strategy")) {
        const auto& s = root["strategy"];
        reject_unknown(s, "strategy", {"kind", "workers", "clients", "local_epochs", "global_batch",
                                       "total_epochs", "freeze_epochs"});
        std::string kind = "sgd";
        read(s, "kind", "strategy", kind);
        if (kind == "sgd") cfg.strategy.kind = StrategyKind::sgd;
        else if (kind == "dsgd") cfg.strategy.kind = StrategyKind::dsgd;
        else if (kind == "fedavg") cfg.strategy.kind = StrategyKind::fedavg;
        else throw ConfigError("strategy.kind must be one of sgd, dsgd, fedavg (got '" + kind + "')");
        read(s, "workers", "strategy", cfg.strategy.workers);
        read(s, "clients", "strategy", cfg.strategy.clients);
        read(s, "local_epochs", "strategy", cfg.strategy.local_epochs);
        read(s, "global_batch", "strategy", cfg.strategy.global_batch);
        read(s, "total_epochs", "strategy", cfg.strategy.total_epochs);
        read(s, "freeze_epochs", "strategy", cfg.strategy.freeze_epochs);
    }
    cfg.strategy.seed = seed;

    if (root.contains("schedule")) {
        const auto& s = root["schedule"];
        reject_unknown(s, "schedule", {"lr_init", "lr_max", "lr_min", "warmup_epochs"});
        read(s, "lr_init", "schedule", cfg.schedule.lr_init);
        read(s, "lr_max", "schedule", cfg.schedule.lr_max);
        read(s, "lr_min", "schedule", cfg.schedule.lr_min);
        read(s, "warmup_epochs", "schedule", cfg.schedule.warmup_epochs);
    }
    cfg.schedule.total_epochs = cfg.strategy.total_epochs;

    if (root.contains("optimizer")) {
        const auto& o = root["optimizer"];
        reject_unknown(o, "optimizer", {"momentum", "weight_decay"});
        read(o, "momentum", "optimizer", cfg.optimizer.momentum);
        read(o, "weight_decay", "optimizer", cfg.optimizer.weight_decay);
    }

    if (!root.contains("data")) throw ConfigError("missing required key 'data'");
    {
        const auto& d = root["data"];
        reject_unknown(d, "data", {"manifest", "val_manifest", "val_fraction", "shards"});
        std::string manifest, val_manifest, shards = "partition";
        read(d, "manifest", "data", manifest);
        read(d, "val_manifest", "data", val_manifest);
        read(d, "val_fraction", "data", cfg.val_fraction);
        read(d, "shards", "data", shards);
        if (manifest.empty()) throw ConfigError("missing required key 'data.manifest'");
        cfg.manifest = resolve(base_dir, manifest);
        if (!val_manifest.empty()) cfg.val_manifest = resolve(base_dir, val_manifest);
        if (shards == "partition") cfg.shards = ShardSource::partition;
        else if (shards == "manifest") cfg.shards = ShardSource::manifest;
        else throw ConfigError("data.shards must be 'partition' or 'manifest'");
        if (cfg.val_manifest.empty() && !(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) {
            throw ConfigError("data.val_fraction must be in (0, 1)");
        }
    }

    std::string out_dir;
    read(root, "out_dir", "", out_dir);
    if (out_dir.empty()) throw ConfigError("missing required key 'out_dir'");
    cfg.out_dir = resolve(base_dir, out_dir);

    try {
        cfg.model.validate();
        cfg.strategy.validate();
        cfg.schedule.validate();
        cfg.optimizer.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path());
}

}  // namespace miniseg
