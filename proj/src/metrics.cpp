#include "transedge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

namespace transedge::metrics {

namespace {

struct outcome {
    std::string cls;
    sim_time submitted = 0;
    sim_time done = -1;
    bool committed = false;
    bool second_round = false;
    std::uint64_t messages = 0;
};

row make_row(const std::string& kind, const std::vector<const outcome*>& xs, double span_s)
{
    row r;
    r.kind = kind;
    r.count = xs.size();
    std::vector<double> lat;
    std::size_t second = 0, read_only = 0;
    std::uint64_t msgs = 0;
    for (const auto* o : xs) {
        msgs += o->messages;
        if (o->cls == "read_only") {
            ++read_only;
            if (o->second_round) ++second;
        }
        if (o->done < 0) continue;
        if (o->committed) {
            ++r.committed;
            lat.push_back(static_cast<double>(o->done - o->submitted));
        } else {
            ++r.aborted;
        }
    }
    auto finished = r.committed + r.aborted;
    if (finished) r.abort_pct = 100.0 * static_cast<double>(r.aborted) / static_cast<double>(finished);
    if (span_s > 0) r.throughput_tps = static_cast<double>(r.committed) / span_s;
    r.lat_p50_ms = percentile(lat, 50);
    r.lat_p90_ms = percentile(lat, 90);
    r.lat_p99_ms = percentile(lat, 99);
    if (!lat.empty()) r.lat_mean_ms = std::accumulate(lat.begin(), lat.end(), 0.0) / static_cast<double>(lat.size());
    if (read_only) r.ro_round2_pct = 100.0 * static_cast<double>(second) / static_cast<double>(read_only);
    if (r.count) r.msgs_per_txn = static_cast<double>(msgs) / static_cast<double>(r.count);
    return r;
}

} // namespace

double percentile(std::vector<double> xs, double pct)
{
    if (xs.empty()) return 0;
    std::sort(xs.begin(), xs.end());
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(xs.size())));
    return xs[std::clamp<std::size_t>(rank, 1, xs.size()) - 1];
}

std::vector<row> summarize(const trace::trace_log& log)
{
    std::map<txn_id, outcome> all;
    sim_time first = -1, last = -1;
    for (const auto& e : log.events()) {
        if (const auto* s = std::get_if<trace::submitted>(&e)) {
            all[s->txn] = {s->cls, s->t};
            if (first < 0 || s->t < first) first = s->t;
        } else if (const auto* r = std::get_if<trace::reply>(&e)) {
            auto& o = all[r->txn];
            o.done = r->t;
            o.committed = r->committed;
            last = std::max(last, r->t);
        } else if (const auto* d = std::get_if<trace::ro_done>(&e)) {
            auto& o = all[d->txn];
            o.done = d->t;
            o.committed = d->ok;
            o.second_round = d->rounds > 1;
            last = std::max(last, d->t);
        } else if (const auto* m = std::get_if<trace::messages>(&e)) {
            auto& o = all[m->txn];
            o.messages = std::accumulate(m->counts.begin(), m->counts.end(), std::uint64_t{0});
        }
    }
    double span_s = (first >= 0 && last > first) ? static_cast<double>(last - first) / 1000.0 : 0;

    std::map<std::string, std::vector<const outcome*>> by_class;
    std::vector<const outcome*> everything;
    for (const auto& [id, o] : all) {
        if (o.cls.empty()) continue; // messages for ids never submitted (genesis and the like)
        by_class[o.cls].push_back(&o);
        everything.push_back(&o);
    }
    std::vector<row> out;
    for (const auto& [cls, xs] : by_class) out.push_back(make_row(cls, xs, span_s));
    out.push_back(make_row("all", everything, span_s));
    return out;
}

const row* find(const std::vector<row>& rows, const std::string& kind)
{
    auto it = std::find_if(rows.begin(), rows.end(), [&](const row& r) { return r.kind == kind; });
    return it == rows.end() ? nullptr : &*it;
}

void write_csv(std::ostream& os, const std::vector<row>& rows)
{
    os << csv_header << '\n' << std::fixed << std::setprecision(3);
    for (const auto& r : rows) {
        os << r.kind << ',' << r.count << ',' << r.committed << ',' << r.aborted << ',' << r.abort_pct << ','
           << r.throughput_tps << ',' << r.lat_p50_ms << ',' << r.lat_p90_ms << ',' << r.lat_p99_ms << ','
           << r.lat_mean_ms << ',' << r.ro_round2_pct << ',' << r.msgs_per_txn << '\n';
    }
}

double ro_round1_mean_ms(const trace::trace_log& log)
{
    std::unordered_map<txn_id, sim_time> submitted;
    double sum = 0;
    std::size_t n = 0;
    for (const auto& e : log.events()) {
        if (const auto* s = std::get_if<trace::submitted>(&e)) submitted[s->txn] = s->t;
        else if (const auto* d = std::get_if<trace::ro_done>(&e); d && d->ok) {
            sum += static_cast<double>(d->round1_t - submitted[d->txn]);
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0;
}

} // namespace transedge::metrics
