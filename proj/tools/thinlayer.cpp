// thinlayer command-line front end: run, verify, study, list-scenarios.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "thinlayer/config.hpp"
#include "thinlayer/thinlayer.hpp"

namespace fs = std::filesystem;
using namespace thinlayer;

namespace {

int thread_cap()
{
    const char* env = std::getenv("THINLAYER_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw ParameterError(std::string("THINLAYER_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<int>(n);
}

RunConfig resolve_config(const std::string& config_path, const std::string& scenario)
{
    if (!config_path.empty() && !scenario.empty()) throw ParameterError("give either a config file or --scenario, not both");
    if (!config_path.empty()) return load_config(config_path);
    if (scenario.empty()) throw ParameterError("no config file or --scenario given");
    RunConfig cfg;
    cfg.spec = find_scenario(scenario);
    cfg.output_dir = "out/" + scenario;
    return cfg;
}

void write_snapshot(const fs::path& dir, int n, const ThicknessField& u)
{
    char name[32];
    std::snprintf(name, sizeof name, "field_%04d.csv", n);
    std::ofstream os(dir / name);
    const bool two_d = u.mesh().dimension() == 2;
    os << (two_d ? "x,y,u\n" : "x,u\n");
    for (std::size_t i = 0; i < u.size(); ++i) {
        const Point x = u.mesh().cells()[i].centroid;
        os << format_double(x[0]) << ',';
        if (two_d) os << format_double(x[1]) << ',';
        os << format_double(u[i]) << '\n';
    }
}

int cmd_run(const std::string& config_path, const std::string& scenario, const std::string& out_override)
{
    const RunConfig cfg = resolve_config(config_path, scenario);
    const int threads = thread_cap();
    const fs::path dir = out_override.empty() ? fs::path(cfg.output_dir) : fs::path(out_override);
    fs::create_directories(dir);

    std::ofstream ledger(dir / "ledger.csv");
    std::ofstream log(dir / "run.log");
    ledger << ledger_csv_header() << '\n';
    log << "scenario " << cfg.spec.name << " backend=" << to_string(cfg.spec.backend)
        << " scheme=" << cfg.spec.scheme.name() << " steps=" << cfg.spec.steps << " threads=" << threads << '\n';

    const int every = cfg.spec.snapshot_every;
    {
        const auto mesh = cfg.spec.mesh.build();
        if (every > 0) write_snapshot(dir, 0, initial_field(cfg.spec, mesh));
    }
    auto observe = [&](const LedgerEntry& e, const ThicknessField& u, const StepReport& sr) {
        for (const auto& rep : sr.solves) log << "step " << sr.n << ' ' << rep.log_line() << '\n';
        if (e.n != sr.n) return;  // failed step: no ledger row
        ledger << ledger_csv_row(e) << '\n';
        if (e.flagged) log << "step " << sr.n << " balance flag residual=" << format_double(e.balance_residual) << '\n';
        if (every > 0 && sr.n % every == 0) write_snapshot(dir, sr.n, u);
        ledger.flush();
        log.flush();
    };
    const RunResult r = run_scenario(cfg.spec, observe);

    for (const auto& t : r.tags)
        log << "expect " << t.tag << ' ' << (t.passed ? "pass" : "FAIL") << (t.detail.empty() ? "" : " " + t.detail)
            << '\n';
    if (!r.failure.empty()) log << "solver failure: " << r.failure << '\n';
    if (!r.certificates_passed) log << "complementarity certificate failed\n";

    nlohmann::ordered_json s;
    s["scenario"] = cfg.spec.name;
    s["steps_completed"] = r.ledger.size();
    s["initial_mass"] = r.initial_mass;
    s["final_mass"] = r.ledger.empty() ? r.initial_mass : r.ledger.back().M;
    s["sum_C"] = r.sum_C();
    s["sum_R"] = r.sum_R();
    s["sum_B"] = r.sum_B();
    s["sum_S"] = r.sum_S();
    s["max_balance_residual"] = r.max_abs_balance();
    s["balance_flags"] = std::count_if(r.ledger.begin(), r.ledger.end(), [](const LedgerEntry& e) { return e.flagged; });
    s["retreat_bound_violations"] =
        std::count_if(r.ledger.begin(), r.ledger.end(), [](const LedgerEntry& e) { return !e.retreat_within_bound(); });
    s["complementarity"] = r.certificates_passed;
    s["failure"] = r.failure;
    auto& tags = s["expect"] = nlohmann::ordered_json::object();
    for (const auto& t : r.tags) tags[t.tag] = t.passed;
    std::ofstream(dir / "summary.json") << s.dump(2) << '\n';

    const bool ok = r.ok() && r.certificates_passed;
    std::cout << cfg.spec.name << ": " << r.ledger.size() << " steps, final mass " << format_double(s["final_mass"])
              << ", sum R " << format_double(r.sum_R()) << ", max balance residual "
              << format_double(r.max_abs_balance()) << (ok ? "" : "  [FAILED]") << '\n';
    if (!r.failure.empty()) std::cerr << "error: " << r.failure << '\n';
    return ok ? 0 : 1;
}

int cmd_study(const std::string& config_path, const std::string& scenario, const std::string& out_override,
              int levels)
{
    const RunConfig cfg = resolve_config(config_path, scenario);
    thread_cap();
    const fs::path dir = out_override.empty() ? fs::path(cfg.output_dir) : fs::path(out_override);
    fs::create_directories(dir);
    const StudyResult st = refinement_study(cfg.spec, levels);
    std::ofstream os(dir / "study.csv");
    os << "kind,level,h,dt,steps,sum_abs_B,sum_R,sum_S,max_balance_residual,final_mass,ok\n";
    for (const auto& r : st.rows)
        os << r.kind << ',' << r.level << ',' << format_double(r.h) << ',' << format_double(r.dt) << ',' << r.steps
           << ',' << format_double(r.sum_abs_B) << ',' << format_double(r.sum_R) << ',' << format_double(r.sum_S)
           << ',' << format_double(r.max_balance) << ',' << format_double(r.final_mass) << ',' << (r.ok ? 1 : 0)
           << '\n';
    auto line = [](const char* what, bool ok) { std::cout << (ok ? "PASS " : "FAIL ") << what << '\n'; };
    line("|B| non-increasing under h refinement", st.B_nonincreasing);
    line("R decreasing under dt refinement", st.R_decreasing);
    line("R ratios between levels in [1, 4]", st.R_ratio_in_range);
    line("all runs closed their balance", st.runs_ok);
    return st.passed() ? 0 : 1;
}

struct VerifyOptions {
    std::string suite;
    std::uint64_t samples = 0;
    std::uint64_t seed = 7;
    std::string flux = "plap";
    double k = 1.0, p = 2.0, r = 1.0, gamma = 2.0;
    int cells = 50;
};

FluxModel verify_flux(const VerifyOptions& o)
{
    if (o.flux == "plap") return FluxModel::plaplacian(o.k, o.p);
    if (o.flux == "doubly") return FluxModel::doubly_nonlinear(o.k, o.r, o.p);
    if (o.flux == "porous") return FluxModel::porous_medium(o.k, o.gamma);
    if (o.flux == "advective") return FluxModel::advective(VelocityField::converging(1.0, 1, {0.5, 0.0}), 0.1, o.p);
    throw ParameterError("unknown flux '" + o.flux + "' (expected plap, doubly, porous or advective)");
}

int verify_inequalities(const VerifyOptions& o)
{
    const std::uint64_t n = o.samples ? o.samples : 1000000;
    bool ok = true;
    const std::pair<Lemma, const char*> lemmas[] = {
        {Lemma::pbig, "pbig    p in [2,6]"}, {Lemma::psmall, "psmall  p in (1,2]"}, {Lemma::holder, "holder  p in (1,2]"}};
    for (const auto& [lemma, name] : lemmas) {
        const auto s = fuzz_inequality(lemma, n, o.seed);
        ok = ok && s.passed();
        std::printf("%s %s samples=%llu violations=%llu vacuous=%llu worst_margin=%.3e\n", s.passed() ? "PASS" : "FAIL",
                    name, static_cast<unsigned long long>(s.samples), static_cast<unsigned long long>(s.violations),
                    static_cast<unsigned long long>(s.vacuous), s.worst_relative_margin);
    }
    double worst = 0.0;
    for (double p : {2.0, 2.5, 3.0, 4.0, 6.0}) {
        const double x[] = {0.3, -1.1, 0.7}, y[] = {-0.3, 1.1, -0.7};
        const auto s = check_pbig_inequality(x, y, p);
        worst = std::max(worst, std::abs(s.lhs / s.rhs - 1.0));
    }
    const bool sharp = worst <= 1e-14;
    ok = ok && sharp;
    std::printf("%s pbig sharpness at y = -x: |ratio - 1| = %.3e\n", sharp ? "PASS" : "FAIL", worst);
    return ok ? 0 : 1;
}

int verify_monotonicity(const VerifyOptions& o)
{
    const auto mesh = std::make_shared<const Mesh>(build_interval_mesh(0.0, 1.0, o.cells));
    const auto u0 = ThicknessField::sample(mesh, Backend::fv, [](const Point&) { return 0.5; });
    const auto stage = theta_stage(1.0, verify_flux(o), SourceModel::linear(0.6, 1.2), u0, 0.0, 0.01);
    const auto rep = check_monotonicity(stage, o.samples ? o.samples : 1000, o.seed);
    std::printf("%s monotonicity flux=%s p=%g samples=%zu min_inner=%.6e min_relative=%.6e%s\n",
                rep.passed() ? "PASS" : "FAIL", stage.flux.name().c_str(), stage.flux.p(), rep.samples, rep.min_inner,
                rep.min_relative, rep.transformed ? " (transformed variable)" : "");
    return rep.passed() ? 0 : 1;
}

int verify_flux_assumptions(const VerifyOptions& o)
{
    const auto model = verify_flux(o);
    const auto mesh = std::make_shared<const Mesh>(build_interval_mesh(0.0, 1.0, o.cells));
    std::mt19937_64 rng(o.seed);
    std::vector<ThicknessField> fields;
    const std::uint64_t n = o.samples ? o.samples : 100;
    for (std::uint64_t i = 0; i < n; ++i)
        fields.emplace_back(mesh, Backend::fv, detail::random_admissible(rng, *mesh, 2.0));
    const auto rep = check_standard_flux_assumptions(model, fields);
    std::printf("flux %s: samples=%zu zero-thickness samples=%zu\n", model.name().c_str(), rep.samples,
                rep.zero_thickness_samples);
    std::printf("%s zero flux on zero thickness (max |q| = %.3e)\n", rep.zero_flux_pass ? "PASS" : "FAIL",
                rep.max_zero_flux);
    std::printf("%s continuity in (grad u, u) (worst ratio %.3e)\n", rep.continuity_pass ? "PASS" : "FAIL",
                rep.worst_continuity_ratio);
    std::printf("%s finite flux for finite input\n", rep.finite_pass ? "PASS" : "FAIL");
    return rep.passed() ? 0 : 1;
}

int cmd_verify(const VerifyOptions& o)
{
    thread_cap();
    if (o.suite == "inequalities") return verify_inequalities(o);
    if (o.suite == "monotonicity") return verify_monotonicity(o);
    if (o.suite == "flux-assumptions") return verify_flux_assumptions(o);
    throw ParameterError("unknown suite '" + o.suite + "' (expected inequalities, monotonicity or flux-assumptions)");
}

int cmd_list()
{
    for (const auto& s : scenario_catalog()) std::printf("%-22s %s\n", s.name.c_str(), s.description.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"thinlayer: conservative thin-layer free-boundary solver"};
    app.require_subcommand(1);

    std::string config, scenario, out;
    int levels = 3;

    auto* run = app.add_subcommand("run", "run a scenario and write ledger, snapshots, log and summary");
    run->add_option("config", config, "JSON run configuration");
    run->add_option("--scenario", scenario, "catalog scenario name");
    run->add_option("-o,--out", out, "output directory (overrides the config)");

    auto* study = app.add_subcommand("study", "refinement study in h and dt; writes study.csv");
    study->add_option("config", config, "JSON run configuration");
    study->add_option("--scenario", scenario, "catalog scenario name");
    study->add_option("-o,--out", out, "output directory (overrides the config)");
    study->add_option("--levels", levels, "refinement levels")->check(CLI::Range(3, 8));

    VerifyOptions vo;
    auto* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("suite", vo.suite, "inequalities | monotonicity | flux-assumptions")->required();
    verify->add_option("--samples", vo.samples, "number of samples (suite default if 0)");
    verify->add_option("--seed", vo.seed, "random seed");
    verify->add_option("--flux", vo.flux, "plap | doubly | porous | advective");
    verify->add_option("--k", vo.k, "flux coefficient");
    verify->add_option("--p", vo.p, "gradient exponent");
    verify->add_option("--r", vo.r, "thickness exponent (doubly)");
    verify->add_option("--gamma", vo.gamma, "porous-medium exponent");
    verify->add_option("--cells", vo.cells, "mesh cells")->check(CLI::PositiveNumber);

    auto* list = app.add_subcommand("list-scenarios", "print the scenario catalog");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(config, scenario, out);
        if (study->parsed()) return cmd_study(config, scenario, out, levels);
        if (verify->parsed()) return cmd_verify(vo);
        if (list->parsed()) return cmd_list();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
