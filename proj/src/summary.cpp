#include "miniseg/summary.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "miniseg/error.hpp"
#include "miniseg/train.hpp"

namespace miniseg {

namespace fs = std::filesystem;

namespace {

constexpr const char* kReportHeader = "epoch,train_loss,val_loss,val_fscore,lr,bytes_cum";

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <typename T>
T parse_field(const std::string& s, const std::string& where, const char* name) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument(where + ": field " + name + " ('" + s + "') is not a valid number");
    }
    return v;
}

}  // namespace

RunSummary load_run(const fs::path& dir) {
    RunSummary run;
    run.dir = dir;
    const fs::path csv = dir / "report.csv";
    std::ifstream in(csv);
    if (!in) throw std::invalid_argument(csv.string() + ": cannot open report");
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || line != kReportHeader) {
        throw std::invalid_argument(csv.string() + ":1: expected header '" + std::string(kReportHeader) + "'");
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = csv.string() + ":" + std::to_string(line_no);
        auto f = split_fields(line);
        if (f.size() != 6) throw std::invalid_argument(where + ": expected 6 fields, got " + std::to_string(f.size()));
        const auto epoch = parse_field<std::size_t>(f[0], where, "epoch");
        run.final_train_loss = parse_field<double>(f[1], where, "train_loss");
        run.final_val_loss = parse_field<double>(f[2], where, "val_loss");
        const auto fscore = parse_field<double>(f[3], where, "val_fscore");
        parse_field<double>(f[4], where, "lr");
        run.total_bytes = parse_field<std::uint64_t>(f[5], where, "bytes_cum");
        if (epoch != run.rows.size() + 1) throw std::invalid_argument(where + ": epochs must count up from 1");
        run.best_fscore = run.rows.empty() ? fscore : std::max(run.best_fscore, fscore);
        run.last_epoch = epoch;
        run.rows.push_back(std::move(f));
    }
    if (run.rows.empty()) throw std::invalid_argument(csv.string() + ": report has no rows");

    const fs::path js = dir / "summary.json";
    std::ifstream jin(js);
    if (!jin) throw std::invalid_argument(js.string() + ": cannot open run summary");
    try {
        const auto j = nlohmann::json::parse(jin);
        run.strategy = j.at("strategy").get<std::string>();
        run.sync_events = j.at("sync_events").get<std::uint64_t>();
        const auto bytes = j.at("bytes_up").get<std::uint64_t>() + j.at("bytes_down").get<std::uint64_t>();
        if (bytes != run.total_bytes) {
            throw std::invalid_argument(js.string() + ": byte totals disagree with " + csv.string());
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(js.string() + ": " + e.what());
    }
    if (run.strategy.find(',') != std::string::npos) {
        throw std::invalid_argument(js.string() + ": strategy label contains a comma");
    }
    return run;
}

std::string merge_reports(const std::vector<RunSummary>& runs) {
    std::ostringstream out;
    out << "strategy,row,epoch,train_loss,val_loss,val_fscore,lr,bytes_cum,sync_events,bytes_ratio\n";
    const RunSummary* reference = nullptr;
    for (const auto& r : runs) {
        if (r.total_bytes > 0) {
            reference = &r;
            break;
        }
    }
    for (const auto& r : runs) {
        for (const auto& f : r.rows) {
            out << r.strategy << ",epoch";
            for (const auto& v : f) out << ',' << v;
            out << ",,\n";
        }
        out << r.strategy << ",total," << r.last_epoch << ',' << format_double(r.final_train_loss) << ','
            << format_double(r.final_val_loss) << ',' << format_double(r.best_fscore) << ",," << r.total_bytes
            << ',' << r.sync_events << ',';
        if (reference) {
            out << format_double(static_cast<double>(r.total_bytes) / static_cast<double>(reference->total_bytes));
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace miniseg
