#pragma once

#include "transedge/trace.hpp"

#include <iosfwd>
#include <string>
#include <vector>

// Summary numbers recomputed from a trace. All times are simulated.
namespace transedge::metrics {

struct row {
    std::string kind; // a transaction class, or "all"
    std::size_t count = 0;
    std::size_t committed = 0;
    std::size_t aborted = 0;
    double abort_pct = 0;
    double throughput_tps = 0; // committed per simulated second of the active span
    double lat_p50_ms = 0;
    double lat_p90_ms = 0;
    double lat_p99_ms = 0;
    double lat_mean_ms = 0;
    double ro_round2_pct = 0;
    double msgs_per_txn = 0;
};

inline constexpr const char* csv_header =
    "kind,count,committed,aborted,abort_pct,throughput_tps,lat_p50_ms,lat_p90_ms,lat_p99_ms,lat_mean_ms,"
    "ro_round2_pct,msgs_per_txn";

/// One row per transaction class present, then "all".
std::vector<row> summarize(const trace::trace_log& log);

const row* find(const std::vector<row>& rows, const std::string& kind);

void write_csv(std::ostream& os, const std::vector<row>& rows);

/// Mean time from submission to the end of round one over successful
/// read-only transactions; 0 when there are none.
double ro_round1_mean_ms(const trace::trace_log& log);

/// Nearest-rank percentile of an unsorted sample; 0 when empty.
double percentile(std::vector<double> xs, double pct);

} // namespace transedge::metrics
