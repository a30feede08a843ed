#include "fedsim/metrics.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fedsim {

UnitCosts unit_costs(Algorithm alg) {
    switch (alg) {
        case Algorithm::FedAvg: return {1, 1};
        case Algorithm::FedSumB: return {1, 1};
        case Algorithm::FedSum: return {2, 1};
        case Algorithm::FedSumCR: return {1, 1};
        case Algorithm::Scaffold: return {2, 2};
    }
    throw UsageError("unit_costs: unknown algorithm");
}

std::pair<std::int64_t, std::int64_t> CommLedger::record(Algorithm alg, int active_count) {
    if (active_count < 0) throw UsageError("CommLedger::record: negative active count");
    const UnitCosts u = unit_costs(alg);
    const std::int64_t down = static_cast<std::int64_t>(u.down) * active_count;
    const std::int64_t up = static_cast<std::int64_t>(u.up) * active_count;
    cum_down += down;
    cum_up += up;
    return {down, up};
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_trace_row(const TraceRow& row, TraceFormat format) {
    std::ostringstream os;
    if (format == TraceFormat::Csv) {
        os << row.round << ',' << row.active << ',' << row.tau << ','
           << format_double(row.loss) << ',' << format_double(row.grad_norm_sq) << ','
           << row.cum_down << ',' << row.cum_up << ',' << format_double(row.eta_l);
    } else {
        // Hand-rolled so numeric tokens match the CSV byte for byte.
        os << "{\"round\":" << row.round << ",\"active\":" << row.active
           << ",\"tau\":" << row.tau << ",\"loss\":" << format_double(row.loss)
           << ",\"grad_norm_sq\":" << format_double(row.grad_norm_sq)
           << ",\"cum_down\":" << row.cum_down << ",\"cum_up\":" << row.cum_up
           << ",\"eta_l\":" << format_double(row.eta_l) << '}';
    }
    return os.str();
}

void emit_trace(const std::vector<TraceRow>& rows, const std::filesystem::path& path,
                TraceFormat format) {
    if (rows.empty()) throw UsageError("emit_trace: no rows to write");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open trace for writing: " + path.string());
    if (format == TraceFormat::Csv) out << kTraceCsvHeader << '\n';
    for (const auto& row : rows) out << format_trace_row(row, format) << '\n';
    out.flush();
    if (!out) throw IoError("write failed for trace: " + path.string());
}

std::vector<TraceRow> parse_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kTraceCsvHeader)
        throw IoError("unexpected trace header in " + path.string());
    std::vector<TraceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw IoError("malformed trace row in " + path.string());
        TraceRow r;
        r.round = std::strtoll(cells[0].c_str(), nullptr, 10);
        r.active = static_cast<int>(std::strtol(cells[1].c_str(), nullptr, 10));
        r.tau = std::strtoll(cells[2].c_str(), nullptr, 10);
        r.loss = std::strtod(cells[3].c_str(), nullptr);
        r.grad_norm_sq = std::strtod(cells[4].c_str(), nullptr);
        r.cum_down = std::strtoll(cells[5].c_str(), nullptr, 10);
        r.cum_up = std::strtoll(cells[6].c_str(), nullptr, 10);
        r.eta_l = std::strtod(cells[7].c_str(), nullptr);
        rows.push_back(r);
    }
    return rows;
}

} // namespace fedsim
