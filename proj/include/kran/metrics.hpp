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

#ifndef KRAN_METRICS_HPP
#define KRAN_METRICS_HPP

#include "kran/ran.hpp"
#include "kran/scenario.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace kran {

// Empty denominators leave a value at 0 and clear the matching *_valid flag.
struct Metrics {
    std::string scenario;
    RunMode mode = RunMode::Knowledge;
    std::uint64_t seed = 0;
    std::int64_t steps = 0;
    double duration = 0.0;

    std::uint64_t beam_measurements_total = 0;
    double beam_misselection_rate = 0.0; // active beam more than 3 dB below the best one
    bool misselection_valid = false;
    double mean_rssi_dbm = 0.0;
    double oracle_mean_rssi_dbm = 0.0;
    bool rssi_valid = false;

    std::map<std::pair<Verdict, AuthReason>, std::uint64_t> auth_outcomes;

    std::uint64_t channel_estimates = 0;
    double channel_nmse = 0.0;
    double channel_nmse_envelope = 0.0; // tap magnitudes only
    bool nmse_valid = false;

    std::uint64_t advisories = 0;
    std::uint64_t false_advisories = 0;
    std::uint64_t los_loss_intervals = 0;
    std::uint64_t unannounced_losses = 0;
    double blockage_lead_time_s = 0.0;
    double blockage_min_lead_time_s = 0.0;
    bool lead_valid = false;

    double mode_knowledge = 0.0;
    double mode_window = 0.0;
    double mode_fallback = 0.0;
    bool mode_valid = false;

    double pilot_overhead_total = 0.0;
    std::uint64_t ran_directives_rejected = 0;

    std::uint64_t auth(Verdict v, AuthReason r) const
    {
        auto it = auth_outcomes.find({v, r});
        return it == auth_outcomes.end() ? 0 : it->second;
    }
};

// Verdict/reason pairs with a column of their own, in column order.
inline constexpr std::array<std::pair<Verdict, AuthReason>, 9> kAuthColumns{{
    {Verdict::Accept, AuthReason::Match},
    {Verdict::Accept, AuthReason::NewCell},
    {Verdict::Reject, AuthReason::Geofence},
    {Verdict::Reject, AuthReason::NoWitness},
    {Verdict::Reject, AuthReason::PositionMismatch},
    {Verdict::Reject, AuthReason::FingerprintMismatch},
    {Verdict::Unverified, AuthReason::SensorsUnavailable},
    {Verdict::Unverified, AuthReason::KaUnreachable},
    {Verdict::Unverified, AuthReason::NoKnowledgeAgent},
}};

namespace detail {

inline std::string lower(std::string s)
{
    for (auto &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string csv_float(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v == 0.0 ? 0.0 : v); // no "-0"
    return buf;
}

} // namespace detail

/// Column names in output order.
inline std::vector<std::string> metrics_columns()
{
    std::vector<std::string> cols{"scenario",
                                  "mode",
                                  "seed",
                                  "steps",
                                  "duration_s",
                                  "beam_measurements_total",
                                  "beam_misselection_rate",
                                  "misselection_valid",
                                  "mean_rssi_dbm",
                                  "oracle_mean_rssi_dbm",
                                  "rssi_valid"};
    for (const auto &[v, r] : kAuthColumns)
        cols.push_back("auth_" + detail::lower(to_string(v)) + "_" + detail::lower(to_string(r)));
    for (const char *c : {"channel_estimates", "channel_nmse", "channel_nmse_envelope", "nmse_valid", "advisories",
                          "false_advisories", "los_loss_intervals", "unannounced_losses", "blockage_lead_time_s",
                          "blockage_min_lead_time_s", "lead_valid", "mode_knowledge", "mode_window", "mode_fallback",
                          "mode_valid", "pilot_overhead_total", "ran_directives_rejected"})
        cols.emplace_back(c);
    return cols;
}

inline std::vector<std::string> metrics_values(const Metrics &m)
{
    auto u = [](std::uint64_t v) { return std::to_string(v); };
    auto f = detail::csv_float;
    auto b = [](bool v) { return std::string(v ? "1" : "0"); };
    std::vector<std::string> vals{m.scenario,
                                  to_string(m.mode),
                                  u(m.seed),
                                  std::to_string(m.steps),
                                  f(m.duration),
                                  u(m.beam_measurements_total),
                                  f(m.beam_misselection_rate),
                                  b(m.misselection_valid),
                                  f(m.mean_rssi_dbm),
                                  f(m.oracle_mean_rssi_dbm),
                                  b(m.rssi_valid)};
    for (const auto &[v, r] : kAuthColumns) vals.push_back(u(m.auth(v, r)));
    vals.insert(vals.end(), {u(m.channel_estimates), f(m.channel_nmse), f(m.channel_nmse_envelope), b(m.nmse_valid),
                             u(m.advisories), u(m.false_advisories), u(m.los_loss_intervals), u(m.unannounced_losses),
                             f(m.blockage_lead_time_s), f(m.blockage_min_lead_time_s), b(m.lead_valid),
                             f(m.mode_knowledge), f(m.mode_window), f(m.mode_fallback), b(m.mode_valid),
                             f(m.pilot_overhead_total), u(m.ran_directives_rejected)});
    return vals;
}

inline std::string join_csv(const std::vector<std::string> &cells)
{
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out;
}

/// Header row plus one value row.
inline std::string metrics_csv(const Metrics &m)
{
    return join_csv(metrics_columns()) + '\n' + join_csv(metrics_values(m)) + '\n';
}

/// Parses the output of metrics_csv back into column -> cell text.
inline std::map<std::string, std::string> parse_metrics_csv(const std::string &text)
{
    std::istringstream is(text);
    std::string header, row;
    if (!std::getline(is, header) || !std::getline(is, row)) throw InvalidInput("metrics csv needs a header and a row");
    auto split = [](const std::string &line) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) out.push_back(cell);
        if (!line.empty() && line.back() == ',') out.emplace_back();
        return out;
    };
    const auto h = split(header), v = split(row);
    if (h.size() != v.size()) throw InvalidInput("metrics csv header and row differ in width");
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < h.size(); ++i) out[h[i]] = v[i];
    return out;
}

} // namespace kran

#endif // KRAN_METRICS_HPP
