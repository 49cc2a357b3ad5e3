#pragma once

// Command implementations behind the CLI binary, callable in-process so the
// test suite can drive them without spawning.

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "tetrasim/abstract_queue.hpp"
#include "tetrasim/analytic.hpp"
#include "tetrasim/config.hpp"
#include "tetrasim/csv.hpp"
#include "tetrasim/scenario.hpp"

namespace tetrasim::cli {

using scenario::ConfigError;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point,
                                 std::uint64_t replication) {
    return splitmix64(base ^ splitmix64(0x51ED2701 + point * 977 + replication));
}

// ---------------------------------------------------------------- validate

struct ValidateOptions {
    std::uint64_t deliveries = 1'000'000;
    std::uint64_t seed = 1;
    std::vector<double> lambdas = {0.06, 0.1, 0.3, 0.5, 0.9};
    std::vector<double> alphas = {0.1, 0.4};
    double mu = 1.0;
};

struct ValidatePoint {
    Discipline discipline;
    double lambda_f, mu, alpha;
    double analytic_paoi, sim_paoi, se, ci95, z, rel_err;
    std::uint64_t deliveries;
    bool flagged;
    bool pass;
};

struct ValidateReport {
    std::vector<ValidatePoint> points;
    bool pass = true;
};

inline constexpr const char* kValidateCsvHeader =
    "schema_version,discipline,lambda_f,mu,alpha,deliveries,analytic_paoi_s,"
    "sim_paoi_s,se_s,ci95_s,z_score,rel_err,pass";

/// Abstract-queue Monte Carlo vs closed forms on the grid. A point passes
/// when the analytic mean lies within the simulated 3-sigma batch-means CI
/// and the relative error is at most 1%. Under-sampled points are flagged as
/// wide-CI warnings, not failures.
inline ValidateReport run_validate(const ValidateOptions& opt) {
    ValidateReport rep;
    std::uint64_t point_idx = 0;
    for (double alpha : opt.alphas) {
        for (double lam : opt.lambdas) {
            for (auto d : {Discipline::Pr, Discipline::Prrt, Discipline::Npr}) {
                ModelParams p;
                p.lambda_f = lam;
                p.mu = opt.mu;
                p.alpha = alpha;
                p.discipline = d;
                abstract_queue::SimOptions so;
                so.n_deliveries = opt.deliveries;
                so.seed = derive_seed(opt.seed, point_idx, 0);
                auto r = abstract_queue::simulate_abstract(p, so);
                double an = analytic::paoi(p).paoi;

                ValidatePoint v;
                v.discipline = d;
                v.lambda_f = lam;
                v.mu = opt.mu;
                v.alpha = alpha;
                v.analytic_paoi = an;
                v.sim_paoi = r.paoi.mean;
                v.se = r.paoi.se;
                v.ci95 = r.paoi.ci95_half;
                v.z = r.paoi.se > 0 ? (r.paoi.mean - an) / r.paoi.se : 0.0;
                v.rel_err = std::abs(r.paoi.mean - an) / an;
                v.deliveries = r.delivered;
                v.flagged = r.paoi.flagged;
                v.pass = v.flagged || (std::abs(v.z) <= 3.0 && v.rel_err <= 0.01);
                if (!v.pass) rep.pass = false;
                rep.points.push_back(v);
                ++point_idx;
            }
        }
    }
    return rep;
}

inline void write_validate_csv(const ValidateReport& rep, std::ostream& os) {
    os << kValidateCsvHeader << '\n';
    for (const auto& v : rep.points) {
        csv::Row row;
        row.add(std::string(csv::kSchemaVersion))
            .add(std::string(to_string(v.discipline)))
            .add(v.lambda_f)
            .add(v.mu)
            .add(v.alpha)
            .add(v.deliveries)
            .add(v.analytic_paoi)
            .add(v.sim_paoi)
            .add(v.se)
            .add(v.ci95)
            .add(v.z)
            .add(v.rel_err)
            .add(v.pass);
        os << row.str() << '\n';
    }
}

inline int cmd_validate(const ValidateOptions& opt, std::ostream& report,
                        std::ostream* csv_out) {
    auto rep = run_validate(opt);
    report << "analytic vs simulation, " << opt.deliveries
           << " deliveries per point, 3-sigma gate, <=1% relative error\n";
    report << "  disc  lambda_f  alpha   analytic        sim    ci95      z     rel_err  verdict\n";
    for (const auto& v : rep.points) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "  %-5s %7.3g  %5.3g  %10.6f %10.6f %7.4f  %+6.2f  %8.2e  %s",
                      to_string(v.discipline), v.lambda_f, v.alpha, v.analytic_paoi,
                      v.sim_paoi, v.ci95, v.z, v.rel_err,
                      v.flagged ? "WIDE-CI" : (v.pass ? "ok" : "FAIL"));
        report << line << '\n';
    }
    report << (rep.pass ? "PASS" : "FAIL") << " (" << rep.points.size() << " points)\n";
    if (csv_out) write_validate_csv(rep, *csv_out);
    return rep.pass ? kExitOk : kExitFail;
}

// ------------------------------------------------------------------- sweep

inline constexpr const char* kSweepCsvHeader =
    "schema_version,command,mode,setting,fr_discipline,gw_discipline,sweep_parameter,"
    "sweep_value,replication,seed,n_f,n_c,lambda_f,alpha_ch,alpha_ch_dmo,horizon_s,"
    "deliveries,generated,in_flight,stale,mean_paoi_s,paoi_se_s,paoi_ci95_s,paoi_samples,"
    "downlink_paoi_s,plr,plr_channel,plr_preempt,plr_replace,plr_busy,plr_access_fail,"
    "mean_service_s,collision_rate_tmo,collision_rate_dmo,emergent_alpha_tmo,"
    "emergent_alpha_dmo,events,truncated,flagged";

inline void write_result_row(std::ostream& os, const std::string& command,
                             const scenario::ScenarioConfig& c, const std::string& parameter,
                             double value, std::uint64_t replication, std::uint64_t seed,
                             const metrics::RunResult& r) {
    csv::Row row;
    row.add(std::string(csv::kSchemaVersion))
        .add(command)
        .add(std::string(c.mode == scenario::Mode::Tmo ? "tmo" : "dmo"))
        .add(c.mode == scenario::Mode::Dmo ? c.resolved_setting() : 0)
        .add(std::string(to_string(c.resolved_fr_discipline())))
        .add(std::string(c.mode == scenario::Mode::Dmo ? to_string(c.resolved_gw_discipline())
                                                       : ""))
        .add(parameter)
        .add(value)
        .add(replication)
        .add(seed)
        .add(c.n_f)
        .add(c.n_c)
        .add(c.lambda_f)
        .add(c.alpha_ch)
        .add(c.alpha_ch_dmo)
        .add(c.horizon_s)
        .add(r.delivered)
        .add(r.generated)
        .add(r.in_flight)
        .add(r.stale)
        .add(r.paoi.mean)
        .add(r.paoi.se)
        .add(r.paoi.ci95_half)
        .add(r.paoi.count)
        .add(r.downlink_paoi.mean)
        .add(r.plr())
        .add(r.plr_fraction(r.drops.channel))
        .add(r.plr_fraction(r.drops.preempt))
        .add(r.plr_fraction(r.drops.replace))
        .add(r.plr_fraction(r.drops.busy))
        .add(r.plr_fraction(r.drops.access_fail))
        .add(r.mean_service_s)
        .add(r.collision_rate_tmo)
        .add(r.collision_rate_dmo)
        .add(r.emergent_alpha_tmo)
        .add(r.emergent_alpha_dmo)
        .add(r.events)
        .add(r.truncated)
        .add(r.paoi.flagged);
    os << row.str() << '\n';
}

/// One CSV row per (sweep value, replication), in that order.
inline int cmd_sweep(const config::ParsedConfig& parsed, std::ostream& csv_out) {
    if (!parsed.sweep) throw ConfigError("sweep: block required for the sweep command");
    const auto& spec = *parsed.sweep;
    csv_out << kSweepCsvHeader << '\n';
    for (std::size_t pi = 0; pi < spec.values.size(); ++pi) {
        for (int rep = 0; rep < spec.replications; ++rep) {
            scenario::ScenarioConfig c = parsed.scenario;
            config::apply_parameter(c, spec.parameter, spec.values[pi]);
            c.seed = (spec.seeds == "fixed")
                         ? parsed.scenario.seed
                         : derive_seed(parsed.scenario.seed, 0, static_cast<std::uint64_t>(rep));
            scenario::ScenarioSim sim(c);
            auto r = sim.run();
            write_result_row(csv_out, "sweep", c, spec.parameter, spec.values[pi],
                             static_cast<std::uint64_t>(rep), c.seed, r);
        }
    }
    return kExitOk;
}

// --------------------------------------------------------------------- run

inline int cmd_run(const scenario::ScenarioConfig& cfg, std::ostream& summary,
                   std::ostream* csv_out, std::ostream* trace_out) {
    scenario::ScenarioSim sim(cfg);
    if (trace_out) sim.set_trace(trace_out);
    auto r = sim.run();

    summary << "run: mode=" << (cfg.mode == scenario::Mode::Tmo ? "tmo" : "dmo");
    if (cfg.mode == scenario::Mode::Dmo) {
        summary << " setting=" << cfg.resolved_setting();
    }
    summary << " fr_discipline=" << to_string(cfg.resolved_fr_discipline());
    if (cfg.mode == scenario::Mode::Dmo) {
        summary << " gw_discipline=" << to_string(cfg.resolved_gw_discipline());
    }
    summary << " seed=" << cfg.seed << " horizon_s=" << csv::g9(cfg.horizon_s) << '\n';
    summary << "updates: generated=" << r.generated << " delivered=" << r.delivered
            << " in_flight=" << r.in_flight << " stale=" << r.stale << '\n';
    summary << "paoi_s: mean=" << csv::g9(r.paoi.mean) << " se=" << csv::g9(r.paoi.se)
            << " ci95=" << csv::g9(r.paoi.ci95_half) << " samples=" << r.paoi.count
            << (r.paoi.flagged ? " (wide-CI)" : "") << '\n';
    if (r.downlink_paoi.count > 0) {
        summary << "downlink_paoi_s: mean=" << csv::g9(r.downlink_paoi.mean)
                << " samples=" << r.downlink_paoi.count << '\n';
    }
    summary << "plr=" << csv::g9(r.plr()) << " (channel=" << csv::g9(r.plr_fraction(r.drops.channel))
            << " preempt=" << csv::g9(r.plr_fraction(r.drops.preempt))
            << " replace=" << csv::g9(r.plr_fraction(r.drops.replace))
            << " busy=" << csv::g9(r.plr_fraction(r.drops.busy))
            << " access_fail=" << csv::g9(r.plr_fraction(r.drops.access_fail)) << ")\n";
    summary << "mean_service_s=" << csv::g9(r.mean_service_s)
            << " collision_rate_tmo=" << csv::g9(r.collision_rate_tmo)
            << " emergent_alpha_tmo=" << csv::g9(r.emergent_alpha_tmo);
    if (cfg.mode == scenario::Mode::Dmo) {
        summary << " collision_rate_dmo=" << csv::g9(r.collision_rate_dmo)
                << " emergent_alpha_dmo=" << csv::g9(r.emergent_alpha_dmo);
    }
    summary << '\n';
    summary << "events=" << r.events << (r.truncated ? " (truncated)" : "") << '\n';

    if (csv_out) {
        *csv_out << kSweepCsvHeader << '\n';
        write_result_row(*csv_out, "run", cfg, "", 0.0, 0, cfg.seed, r);
    }
    return kExitOk;
}

} // namespace tetrasim::cli
