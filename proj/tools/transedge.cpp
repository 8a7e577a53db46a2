// transedge run|check|bench

#include "transedge/metrics.hpp"
#include "transedge/oracle.hpp"
#include "transedge/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace transedge;
namespace fs = std::filesystem;

namespace {

struct common_flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string faults;
    bool unsafe_faults = false;
    bool mutant = false;
    std::string ro_mode;
    std::vector<std::string> overrides; // key=value
};

void add_common(CLI::App& app, common_flags& f)
{
    app.add_option("--config", f.config, "key=value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", f.seed, "run seed");
    app.add_option("--faults", f.faults, "node:behavior[:param=value],... or 'random'");
    app.add_flag("--unsafe-faults", f.unsafe_faults, "allow more than f faulty replicas per cluster");
    app.add_flag("--mutant", f.mutant, "client skips dependency verification");
    app.add_option("--ro-mode", f.ro_mode, "transedge or twopc")->check(CLI::IsMember({"transedge", "twopc"}));
    app.add_option("--set", f.overrides, "override one config key (key=value), repeatable");
}

workload::config_map gather(const common_flags& f)
{
    workload::config_map m;
    if (!f.config.empty()) m = workload::load_config(f.config);
    for (const auto& kv : f.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw workload::invalid_config("--set expects key=value, got " + kv);
        m[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (f.seed) m["seed"] = std::to_string(*f.seed);
    if (!f.faults.empty()) m["faults"] = f.faults;
    if (f.unsafe_faults) m["unsafe_faults"] = "true";
    if (f.mutant) m["mutant"] = "true";
    if (!f.ro_mode.empty()) m["ro_mode"] = f.ro_mode;
    return m;
}

sim_config build(const workload::config_map& m)
{
    sim_config c;
    c.apply(m);
    c.validate();
    return c;
}

void print_report(const oracle::report& r, std::ostream& os)
{
    os << "serializability graph: " << r.vertices << " txns, " << r.edges << " edges, ";
    if (r.sg_cycle) os << "CYCLE " << oracle::describe(*r.sg_cycle) << '\n';
    else os << "acyclic\n";
    for (const auto& [auditor, n] : r.counts) os << "  " << auditor << ": " << n << " finding(s)\n";
    const std::size_t shown = 10;
    for (std::size_t i = 0; i < r.findings.size() && i < shown; ++i)
        os << "    " << r.findings[i].auditor << ": " << r.findings[i].detail << '\n';
    if (r.findings.size() > shown) os << "    ... " << r.findings.size() - shown << " more\n";
    os << (r.ok() ? "ok\n" : "VIOLATIONS\n");
}

int cmd_run(const common_flags& f, const std::string& out_dir)
{
    auto config = build(gather(f));
    auto result = simulate(config);
    fs::create_directories(out_dir);
    result.trace.write((fs::path(out_dir) / "trace.jsonl").string());
    auto rows = metrics::summarize(result.trace);
    {
        std::ofstream csv(fs::path(out_dir) / "metrics.csv");
        metrics::write_csv(csv, rows);
    }
    metrics::write_csv(std::cout, rows);
    std::cout << "simulated " << result.end << " ms, " << result.events << " events"
              << (result.completed ? "" : ", horizon reached") << '\n';
    auto report = oracle::check(result.trace);
    print_report(report, std::cout);
    return report.ok() ? 0 : 1;
}

int cmd_check(const std::string& path)
{
    auto log = trace::trace_log::read(path);
    auto report = oracle::check(log);
    print_report(report, std::cout);
    return report.ok() ? 0 : 1;
}

std::vector<std::string> split(const std::string& text, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

int cmd_bench(const common_flags& f, const std::string& knob, const std::string& values, const std::string& out_dir)
{
    // "latency" is the extra inter-cluster delay; mix points use '/' between weights.
    auto key = knob;
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "bench.csv");
    const std::string header =
        "knob,value,completed,violations,dist_rw_tps,dist_rw_p50_ms,dist_rw_mean_ms,ro_round1_mean_ms,ro_mean_ms,"
        "ro_round2_pct,abort_pct,msgs_per_txn";
    csv << header << '\n' << std::fixed << std::setprecision(3);
    std::cout << header << '\n' << std::fixed << std::setprecision(3);
    int status = 0;
    for (auto v : split(values, ',')) {
        auto m = gather(f);
        std::replace(v.begin(), v.end(), '/', ',');
        m[key] = v;
        auto config = build(m);
        auto result = simulate(config);
        auto rows = metrics::summarize(result.trace);
        auto report = oracle::check(result.trace);
        if (!report.ok()) status = 1;
        metrics::row none;
        const auto* dist = metrics::find(rows, "dist_rw");
        const auto* ro = metrics::find(rows, "read_only");
        const auto* all = metrics::find(rows, "all");
        dist = dist ? dist : &none;
        ro = ro ? ro : &none;
        all = all ? all : &none;
        std::replace(v.begin(), v.end(), ',', '/');
        auto violations = report.findings.size() + (report.sg_cycle ? 1 : 0);
        for (auto* os : {static_cast<std::ostream*>(&csv), static_cast<std::ostream*>(&std::cout)}) {
            *os << knob << ',' << v << ',' << result.completed << ',' << violations << ',' << dist->throughput_tps
                << ',' << dist->lat_p50_ms << ',' << dist->lat_mean_ms << ',' << metrics::ro_round1_mean_ms(result.trace)
                << ',' << ro->lat_mean_ms << ',' << ro->ro_round2_pct << ',' << all->abort_pct << ','
                << all->msgs_per_txn << '\n';
        }
    }
    return status;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"TransEdge protocol simulator"};
    app.require_subcommand(1);

    common_flags run_flags;
    std::string run_out = ".";
    auto* run = app.add_subcommand("run", "simulate one workload; writes metrics.csv and trace.jsonl");
    add_common(*run, run_flags);
    run->add_option("--out-dir", run_out, "output directory");

    std::string trace_path;
    auto* check = app.add_subcommand("check", "replay a trace through the oracle and auditors");
    check->add_option("trace", trace_path, "trace.jsonl")->required()->check(CLI::ExistingFile);

    common_flags bench_flags;
    std::string bench_out = ".", knob, values;
    auto* bench = app.add_subcommand("bench", "sweep one config key; one CSV row per value");
    add_common(*bench, bench_flags);
    bench->add_option("--out-dir", bench_out, "output directory");
    bench->add_option("--knob", knob, "config key to sweep (latency, mix, f, ...)")->required();
    bench->add_option("--values", values, "comma-separated values; mix weights use '/'")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(run_flags, run_out);
        if (*check) return cmd_check(trace_path);
        if (*bench) return cmd_bench(bench_flags, knob, values, bench_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
