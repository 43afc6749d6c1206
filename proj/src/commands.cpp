#include "msh2/commands.hpp"

#include "json.hpp"

#include <cstdio>
#include <ostream>

namespace msh2 {

namespace {

using nlohmann::json;

struct NamedCheck {
    const char* name;
    const Check& check;
    bool required_state_feedback;
};

std::vector<NamedCheck> named_checks(const AssumptionReport& rep) {
    return {
        {"stabilizable_AB2", rep.stabilizable_AB2, true},
        {"no_unit_circle_unobservable_AC1", rep.no_unit_circle_unobservable_AC1, true},
        {"detectable_AC2", rep.detectable_AC2, false},
        {"no_unit_circle_unstabilizable", rep.no_unit_circle_unstabilizable, false},
        {"H_nonzero_at_unstable_poles", rep.H_nonzero_at_unstable_poles, true},
        {"Gy_minimum_phase", rep.Gy_minimum_phase, false},
        {"C2Psi_full_column_rank", rep.C2Psi_full_column_rank, false},
    };
}

AssumptionReport validate_problem(const ProblemFile& pf) {
    const NoiseModel noise = channel_moments(pf.channel);
    return validate_assumptions(pf.plant, noise.mu);
}

bool report_passes(const AssumptionReport& rep, FeedbackKind design) {
    return design == FeedbackKind::Output ? rep.pass() : rep.pass_state_feedback();
}

}  // namespace

std::string format12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

int cmd_validate(const std::string& problem_path, const CommandOptions& opts, std::ostream& os) {
    const ProblemFile pf = load_problem(problem_path);
    const AssumptionReport rep = validate_problem(pf);
    const bool state_fb = pf.design == FeedbackKind::State;
    const bool pass = report_passes(rep, pf.design);

    if (opts.json_output) {
        json j;
        for (const NamedCheck& c : named_checks(rep)) {
            j["checks"][c.name] = {{"ok", c.check.ok}, {"margin", c.check.margin}};
        }
        j["r1"] = rep.r1;
        j["r2"] = rep.r2;
        json poles = json::array();
        for (const Complex& z : rep.unstable_poles) {
            poles.push_back({{"re", z.real()}, {"im", z.imag()}});
        }
        j["unstable_poles"] = poles;
        j["design"] = state_fb ? "state_feedback" : "output_feedback";
        j["pass"] = pass;
        if (!rep.notes.empty()) {
            j["notes"] = rep.notes;
        }
        os << j.dump(2) << "\n";
    } else {
        for (const NamedCheck& c : named_checks(rep)) {
            const bool counts = c.required_state_feedback || !state_fb;
            os << (c.check.ok ? "PASS " : "FAIL ") << c.name << "  margin="
               << format12(c.check.margin) << (counts ? "" : "  (informational)") << "\n";
        }
        os << "r1=" << rep.r1 << " r2=" << rep.r2 << "\n";
        os << "unstable_poles:";
        for (const Complex& z : rep.unstable_poles) {
            os << " " << format_complex(z);
        }
        os << "\n";
        if (!rep.notes.empty()) {
            os << "notes: " << rep.notes << "\n";
        }
        os << (pass ? "PASS" : "FAIL") << "\n";
    }
    return pass ? kExitOk : kExitInfeasible;
}

int cmd_synthesize(const std::string& problem_path, const CommandOptions& opts,
                   std::ostream& os) {
    const ProblemFile pf = load_problem(problem_path);
    const AssumptionReport rep = validate_problem(pf);
    if (!report_passes(rep, pf.design)) {
        os << "assumptions not satisfied:";
        for (const NamedCheck& c : named_checks(rep)) {
            const bool counts = c.required_state_feedback || pf.design == FeedbackKind::Output;
            if (counts && !c.check.ok) {
                os << " " << c.name;
            }
        }
        os << "\n";
        return kExitInfeasible;
    }

    const NoiseModel noise = channel_moments(pf.channel);
    const SynthesisResult result = synthesize(pf.plant, noise, pf.design);
    if (!result.stabilizable) {
        os << "not mean-square stabilizable"
           << (result.message.empty() ? "" : ": " + result.message) << "\n";
        return kExitInfeasible;
    }

    if (!opts.out_path.empty()) {
        save_controller(opts.out_path, *result.K, result);
    }
    if (opts.json_output) {
        json j;
        j["J_opt"] = result.J_opt;
        j["ms_margin"] = result.ms_margin;
        j["iterations"] = result.iterations;
        j["residual"] = result.residual;
        j["order"] = result.K->K.order();
        j["feedback"] = result.K->reads_state ? "state" : "output";
        os << j.dump(2) << "\n";
    } else {
        os << "J_opt=" << format12(result.J_opt) << " ms_margin=" << format12(result.ms_margin)
           << " order=" << result.K->K.order() << " iterations=" << result.iterations
           << " residual=" << format12(result.residual) << "\n";
    }
    return kExitOk;
}

int cmd_analyze(const std::string& problem_path, const std::string& controller_path,
                const CommandOptions& opts, std::ostream& os) {
    const ProblemFile pf = load_problem(problem_path);
    const Controller controller = load_controller(controller_path);
    const NoiseModel noise = channel_moments(pf.channel);
    const SpectralModel sm = spectral_model_from_noise(noise);
    const NominalClosedLoop loop = close_nominal(pf.plant, sm, controller);
    const StabilityReport rep = ms_stability(loop, sm);

    if (opts.json_output) {
        json j;
        j["J_H2"] = rep.J_H2;
        j["margin"] = rep.margin;
        j["rho_ghat"] = rep.rho;
        j["ms_stable"] = rep.ms_stable;
        j["marginal"] = rep.marginal;
        j["norm_zw_sq"] = rep.norm_zw_sq;
        j["norm_uw_sq"] = rep.norm_uw_sq;
        j["norm_zd_phi_sq"] = rep.norm_zd_phi_sq;
        j["norm_ud_phi_sq"] = rep.norm_ud_phi_sq;
        os << j.dump(2) << "\n";
    } else {
        os << "J_H2,margin,rho_ghat,ms_stable,marginal\n";
        os << format12(rep.J_H2) << "," << format12(rep.margin) << "," << format12(rep.rho)
           << "," << (rep.ms_stable ? 1 : 0) << "," << (rep.marginal ? 1 : 0) << "\n";
    }
    return rep.ms_stable ? kExitOk : kExitInfeasible;
}

int cmd_simulate(const std::string& problem_path, const std::string& controller_path,
                 const CommandOptions& opts, std::ostream& os) {
    const ProblemFile pf = load_problem(problem_path);
    const Controller controller = load_controller(controller_path);
    SimConfig config = pf.sim;
    if (opts.seed) {
        config.seed = *opts.seed;
    }
    const SimResult result =
        simulate_closed_loop(pf.plant, controller, config, std::max(1, opts.threads), false);

    os << "mean_power_z,mean_power_u,ci_halfwidth,runs,horizon,burn_in,seed,diverged\n";
    os << format12(result.mean_power_z) << "," << format12(result.mean_power_u) << ","
       << format12(result.ci_halfwidth) << "," << config.runs << "," << config.horizon << ","
       << config.burn_in << "," << config.seed << "," << result.diverged << "\n";
    return result.diverged == 0 ? kExitOk : kExitNumeric;
}

int cmd_sweep(const std::string& problem_path, const CommandOptions& opts, std::ostream& os) {
    const ProblemFile pf = load_problem(problem_path);
    if (!pf.sweep) {
        throw std::invalid_argument("sweep: problem file has no sweep block");
    }
    SimConfig config = pf.sim;
    if (opts.seed) {
        config.seed = *opts.seed;
    }
    const std::vector<SweepPoint> rows =
        sweep(pf.plant, pf.channel, *pf.sweep, config, pf.design, std::max(1, opts.threads));

    os << "param,J_theory,J_sim,ci,ms_stable,rho_ghat,margin\n";
    for (const SweepPoint& row : rows) {
        os << format12(row.param) << "," << format12(row.J_theory) << ","
           << format12(row.J_sim) << "," << format12(row.ci) << ","
           << (row.ms_stable ? 1 : 0) << "," << format12(row.rho_ghat) << ","
           << format12(row.margin) << "\n";
    }
    return kExitOk;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const std::invalid_argument& ex) {
        err << "input error: " << ex.what() << "\n";
        return kExitInput;
    } catch (const std::domain_error& ex) {
        err << "infeasible: " << ex.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return kExitNumeric;
    }
}

}  // namespace msh2
