#include "adasiam/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

namespace fs = std::filesystem;

namespace adasiam {

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string metrics_json(const MetricsReport& m) {
    return "{\"success_auc\": " + fixed6(m.success_auc) +
           ", \"precision_at_20\": " + fixed6(m.precision_at_20) +
           ", \"failures\": " + std::to_string(m.failures) +
           ", \"robustness\": " + fixed6(m.robustness) +
           ", \"eao_lite\": " + fixed6(m.eao_lite) +
           ", \"runtime_seconds\": " + fixed6(m.runtime_seconds) + "}";
}

void check_sequence(const SequenceResult& s) {
    if (s.name.empty()) throw std::invalid_argument("emit_report: unnamed sequence");
    if (s.overlaps.empty()) throw std::invalid_argument("emit_report: sequence '" + s.name +
                                                        "' has no frames");
    if (s.regularity.size() != s.overlaps.size() || s.change.size() != s.overlaps.size())
        throw std::invalid_argument("emit_report: misaligned curves for sequence '" + s.name +
                                    "'");
}

}  // namespace

MetricsReport aggregate_metrics(const std::vector<SequenceResult>& sequences) {
    if (sequences.empty()) throw std::invalid_argument("aggregate_metrics: empty result set");
    MetricsReport agg;
    long long frames = 0;
    double eao_sum = 0.0;
    for (const SequenceResult& s : sequences) {
        agg.success_auc += s.metrics.success_auc;
        agg.precision_at_20 += s.metrics.precision_at_20;
        agg.failures += s.failures;
        agg.runtime_seconds += s.metrics.runtime_seconds;
        eao_sum += s.metrics.eao_lite;
        frames += static_cast<long long>(s.overlaps.size());
    }
    double n = static_cast<double>(sequences.size());
    agg.success_auc /= n;
    agg.precision_at_20 /= n;
    agg.eao_lite = eao_sum / n;
    agg.robustness = frames > 0 ? agg.failures * 1000.0 / static_cast<double>(frames) : 0.0;
    return agg;
}

void emit_report(const EvalReport& report, const std::string& dir) {
    if (report.sequences.empty())
        throw std::invalid_argument("emit_report: empty result set");
    std::vector<SequenceResult> seqs = report.sequences;
    std::sort(seqs.begin(), seqs.end(),
              [](const SequenceResult& a, const SequenceResult& b) { return a.name < b.name; });
    std::set<std::string> names;
    for (const SequenceResult& s : seqs) {
        check_sequence(s);
        if (!names.insert(s.name).second)
            throw std::invalid_argument("emit_report: duplicate sequence name '" + s.name + "'");
    }

    fs::create_directories(fs::path(dir) / "curves");
    MetricsReport agg = aggregate_metrics(seqs);

    std::string json_path = (fs::path(dir) / "report.json").string();
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + json_path);
    out << "{\n";
    out << "  \"note\": \"robustness is failures per 1000 frames and eao_lite is the mean of "
           "per-segment mean overlaps; both differ from the official VOT toolkit "
           "definitions\",\n";
    out << "  \"aggregate\": " << metrics_json(agg) << ",\n";
    out << "  \"sequences\": {\n";
    for (std::size_t i = 0; i < seqs.size(); ++i)
        out << "    \"" << json_escape(seqs[i].name) << "\": " << metrics_json(seqs[i].metrics)
            << (i + 1 < seqs.size() ? ",\n" : "\n");
    out << "  },\n";
    out << "  \"config\": {\n";
    for (std::size_t i = 0; i < report.config_echo.size(); ++i)
        out << "    \"" << json_escape(report.config_echo[i].first) << "\": \""
            << json_escape(report.config_echo[i].second) << "\""
            << (i + 1 < report.config_echo.size() ? ",\n" : "\n");
    out << "  }\n";
    out << "}\n";
    if (!out) throw std::runtime_error("cannot write " + json_path);

    for (const SequenceResult& s : seqs) {
        std::string csv_path = (fs::path(dir) / "curves" / (s.name + ".csv")).string();
        std::ofstream csv(csv_path, std::ios::binary);
        if (!csv) throw std::runtime_error("cannot write " + csv_path);
        csv << "frame,overlap,regularity,change\n";
        for (std::size_t f = 0; f < s.overlaps.size(); ++f)
            csv << f << ',' << fixed6(s.overlaps[f]) << ',' << fixed6(s.regularity[f]) << ','
                << (s.change[f] ? 1 : 0) << '\n';
        if (!csv) throw std::runtime_error("cannot write " + csv_path);
    }
}

void write_table(const std::vector<AblationRow>& rows, const std::string& path) {
    if (rows.empty()) throw std::invalid_argument("write_table: empty result set");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "mode,eao_lite,robustness\n";
    for (const AblationRow& r : rows)
        out << r.mode << ',' << fixed6(r.eao_lite) << ',' << fixed6(r.robustness) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path);
}

}  // namespace adasiam
