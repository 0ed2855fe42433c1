// SPDX-License-Identifier: Apache-2.0
//
// kran - knowledge-supported radio access network control
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// kran command line: run a scenario, the three protocol demonstrations, or a
// baseline-vs-knowledge comparison.
//
// Exit codes: 0 ok, 1 scenario/validation error, 2 usage error.

#include "kran/kran.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#ifndef KRAN_SCENARIO_DIR
#define KRAN_SCENARIO_DIR "scenarios"
#endif

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out = "kran_runs";
    std::string mode;
    bool quiet = false;
};

fs::path resolve(const std::string &name)
{
    const fs::path p(name);
    if (fs::exists(p) || p.has_parent_path()) return p;
    const fs::path bundled = fs::path(KRAN_SCENARIO_DIR) / p;
    return fs::exists(bundled) ? bundled : p;
}

kran::ScenarioConfig load(const Options &o, const std::string &fallback)
{
    kran::ScenarioConfig c = kran::load_scenario(resolve(o.scenario.empty() ? fallback : o.scenario));
    if (o.seed) c.seed = *o.seed;
    if (o.mode == "baseline") c.mode = kran::RunMode::Baseline;
    else if (o.mode == "knowledge") c.mode = kran::RunMode::Knowledge;
    return c;
}

kran::RunResult execute(const kran::ScenarioConfig &c, const Options &o)
{
    kran::RunResult r = kran::run(c);
    const auto dir = kran::write_run_dir(r, c, o.out);
    if (!o.quiet) std::cerr << "wrote " << dir.string() << '\n';
    return r;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

int cmd_run(const Options &o)
{
    const auto c = load(o, "");
    const auto r = execute(c, o);
    std::cout << kran::metrics_csv(r.metrics);
    return 0;
}

int cmd_compare(const Options &o)
{
    auto base = load(o, "warehouse_default.json");
    auto know = base;
    base.mode = kran::RunMode::Baseline;
    know.mode = kran::RunMode::Knowledge;
    const auto rb = execute(base, o);
    const auto rk = execute(know, o);
    std::cout << kran::join_csv(kran::metrics_columns()) << '\n'
              << kran::join_csv(kran::metrics_values(rb.metrics)) << '\n'
              << kran::join_csv(kran::metrics_values(rk.metrics)) << '\n';
    const double b = static_cast<double>(rb.metrics.beam_measurements_total);
    const double k = static_cast<double>(rk.metrics.beam_measurements_total);
    std::cout << "overhead_ratio=" << (b > 0 ? fmt(k / b) : std::string("n/a")) << '\n';
    return 0;
}

int cmd_auth(const Options &o)
{
    const auto c = load(o, "auth_attack.json");
    const auto r = execute(c, o);
    std::cout << "verdict      reason                count\n";
    for (const auto &[v, why] : kran::kAuthColumns) {
        char line[96];
        std::snprintf(line, sizeof line, "%-12s %-21s %llu\n", kran::to_string(v), kran::to_string(why),
                      static_cast<unsigned long long>(r.metrics.auth(v, why)));
        std::cout << line;
    }
    std::cout << "audit entries: " << r.audit.size() << '\n';
    return 0;
}

int cmd_beam(const Options &o)
{
    auto c = load(o, "warehouse_default.json");
    const auto r = execute(c, o);
    const auto &m = r.metrics;
    std::cout << "mode: " << kran::to_string(m.mode) << '\n'
              << "beam measurements: " << m.beam_measurements_total << '\n'
              << "misselection rate: " << fmt(m.beam_misselection_rate) << '\n'
              << "mean rssi dBm: " << fmt(m.mean_rssi_dbm) << " (oracle " << fmt(m.oracle_mean_rssi_dbm) << ")\n";
    if (m.mode == kran::RunMode::Knowledge) {
        auto b = c;
        b.mode = kran::RunMode::Baseline;
        const auto rb = execute(b, o);
        const double base = static_cast<double>(rb.metrics.beam_measurements_total);
        std::cout << "baseline beam measurements: " << rb.metrics.beam_measurements_total << '\n'
                  << "overhead ratio: "
                  << (base > 0 ? fmt(static_cast<double>(m.beam_measurements_total) / base) : std::string("n/a"))
                  << '\n';
    }
    return 0;
}

int cmd_channel(const Options &o)
{
    const auto c = load(o, "channel_change.json");
    const auto r = execute(c, o);
    const auto &m = r.metrics;
    std::cout << "channel estimates: " << m.channel_estimates << '\n'
              << "channel nmse: " << (m.nmse_valid ? fmt(m.channel_nmse) : std::string("n/a")) << '\n'
              << "channel nmse (tap magnitudes): " << (m.nmse_valid ? fmt(m.channel_nmse_envelope) : std::string("n/a"))
              << '\n'
              << "pilot overhead: " << fmt(m.pilot_overhead_total) << '\n'
              << "los losses: " << m.los_loss_intervals << ", advisories: " << m.advisories
              << ", false advisories: " << m.false_advisories << '\n'
              << "blockage lead time s: "
              << (m.lead_valid ? fmt(m.blockage_lead_time_s) + " (min " + fmt(m.blockage_min_lead_time_s) + ")"
                               : std::string("n/a"))
              << '\n';
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"kran: knowledge-supported RAN control simulator"};
    app.require_subcommand(1, 1);
    Options opt;

    auto add = [&](const char *name, const char *help, bool need_scenario) {
        CLI::App *sub = app.add_subcommand(name, help);
        auto *s = sub->add_option("--scenario", opt.scenario, "scenario file (bare names also search the bundled set)");
        if (need_scenario) s->required();
        sub->add_option("--seed", opt.seed, "override the scenario seed");
        sub->add_option("--out", opt.out, "output directory for run folders")->capture_default_str();
        sub->add_option("--mode", opt.mode, "override the run mode")->check(CLI::IsMember({"baseline", "knowledge"}));
        sub->add_flag("--quiet", opt.quiet, "suppress progress messages");
        return sub;
    };
    CLI::App *run = add("run", "run a scenario end to end", true);
    CLI::App *auth = add("auth", "authentication demonstration (auth_attack)", false);
    CLI::App *beam = add("beam", "beam steering demonstration (warehouse_default)", false);
    CLI::App *channel = add("channel", "channel provision demonstration (channel_change)", false);
    CLI::App *compare = add("compare", "baseline and knowledge runs with one seed", false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(opt);
        if (auth->parsed()) return cmd_auth(opt);
        if (beam->parsed()) return cmd_beam(opt);
        if (channel->parsed()) return cmd_channel(opt);
        if (compare->parsed()) return cmd_compare(opt);
    } catch (const kran::ScenarioError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const kran::InvalidInput &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
