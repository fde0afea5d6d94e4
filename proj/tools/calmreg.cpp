#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "calmreg/calming.hpp"
#include "calmreg/csv.hpp"
#include "calmreg/error.hpp"
#include "calmreg/mc_harness.hpp"
#include "calmreg/penalty.hpp"
#include "calmreg/qform_bounds.hpp"
#include "calmreg/tilted_moments.hpp"
#include "calmreg/verify.hpp"

namespace {

using namespace calmreg;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitAcceptance = 4;

struct Globals {
    std::uint64_t seed = 0;
    std::string out = "-";
    std::string config;
    bool quick = false;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(t.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
        kv.emplace_back(key, trim(t.substr(eq + 1)));
    }
    return kv;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Appends config-file entries that the command line does not already set.
std::vector<std::string> merge_config(CLI::App& app, const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;
    CLI::App* sub = nullptr;
    for (const auto& a : args)
        if (auto* s = app.get_subcommand_no_throw(a)) {
            sub = s;
            break;
        }
    std::vector<std::string> merged = args;
    for (const auto& [key, value] : read_config(config_path)) {
        if (key == "config") throw ValidationError("config file may not name another config file");
        const CLI::Option* opt = sub ? sub->get_option_no_throw("--" + key) : nullptr;
        if (!opt) opt = app.get_option_no_throw("--" + key);
        if (!opt) throw ValidationError("unknown config key '" + key + "'");
        if (given_on_command_line(args, key)) continue;
        if (opt->get_expected_min() == 0) {
            if (value == "true" || value == "1") merged.push_back("--" + key);
            else if (value != "false" && value != "0")
                throw ValidationError("config key '" + key + "' expects true or false");
        } else {
            merged.push_back("--" + key);
            merged.push_back(value);
        }
    }
    return merged;
}

void write_output(const Globals& g, const std::string& text) { write_text(g.out, text); }

// ---- bounds ---------------------------------------------------------------

struct BoundsArgs {
    double dim_a = 0, v2 = 0, bnorm = 0;
    std::optional<double> g;
    std::vector<double> x;
};

void cmd_bounds(const Globals& gl, const BoundsArgs& a) {
    const SpectrumStats st = make_stats(a.dim_a, a.v2, a.bnorm);
    std::optional<ExpTailSolution> sol;
    if (a.g) sol = solve_xc(*a.g, st);
    CsvTable t({"x", "z_sq", "z", "mu_x", "branch", "z_c", "x_c", "g_c"});
    for (double x : a.x) {
        if (!(x > 0) || !std::isfinite(x)) throw ValidationError("bounds: x values must be positive");
        const ZQuantile z = z_quantile(st, x);
        std::vector<std::string> row{format_double(x), format_double(z.z_sq), format_double(z.z),
                                     format_double(mu_of_x(st, x))};
        if (sol) {
            row.push_back(zc_branch(*sol, x) == TailBranch::gaussian ? "gaussian" : "exp");
            row.push_back(format_double(zc_quantile(*sol, st, x)));
            row.push_back(format_double(sol->x_c));
            row.push_back(format_double(sol->g_c));
        } else {
            row.insert(row.end(), {"", "", "", ""});
        }
        t.add_row(row);
    }
    write_output(gl, t.str());
}

// ---- tau ------------------------------------------------------------------

struct TauArgs {
    std::string law = "gaussian";
    double variance = 1.0;
    std::vector<double> points, weights;
    double g = 1.0;
    int grid = 256;
    long long n = 1;
};

void cmd_tau(const Globals& gl, const TauArgs& a) {
    ScalarLaw law;
    if (a.law == "gaussian") law = gaussian_law(a.variance);
    else if (a.law == "rademacher") law = rademacher_law();
    else if (a.law == "uniform") law = centered_uniform_law();
    else if (a.law == "tabulated") law = tabulated_law(a.points, a.weights);
    else throw ValidationError("tau: unknown law '" + a.law + "'");
    if (a.grid < 2) throw ValidationError("tau: grid must be >= 2");
    const TiltedSummary s = tau34(law, a.g, a.grid);
    const TauPair iid = iid_tau_scaling(s.tau3, s.tau4, a.n);
    CsvTable t({"law", "g", "tau3", "tau4", "subg_const", "n", "tau3_iid", "tau4_iid"});
    t.add_row({a.law, format_double(a.g), format_double(s.tau3), format_double(s.tau4), format_double(s.subg_const),
               std::to_string(a.n), format_double(iid.tau3), format_double(iid.tau4)});
    write_output(gl, t.str());
}

// ---- penalty --------------------------------------------------------------

struct PenaltyArgs {
    std::string design;
    int dims = 0;
    double g0_scale = 1.0;
    double sigma2 = 1.0;
    double c0 = 1.0;
    std::vector<double> w_grid;
};

Mat read_matrix_csv(const std::string& path) {
    const CsvData d = read_csv_file(path);
    if (d.rows.empty()) throw ValidationError("design file '" + path + "' has no rows");
    Mat m(static_cast<Eigen::Index>(d.rows.size()), static_cast<Eigen::Index>(d.header.size()));
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        if (d.rows[i].size() != d.header.size())
            throw ValidationError("design file row " + std::to_string(i + 1) + " has the wrong width");
        for (std::size_t j = 0; j < d.rows[i].size(); ++j) {
            try {
                std::size_t used = 0;
                m(i, j) = std::stod(d.rows[i][j], &used);
                if (used != d.rows[i][j].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ValidationError("design file: non-numeric entry '" + d.rows[i][j] + "'");
            }
        }
    }
    return m;
}

void cmd_penalty(const Globals& gl, const PenaltyArgs& a) {
    PenaltyInputs in;
    if (!a.design.empty()) in.A = read_matrix_csv(a.design);
    else if (a.dims > 0) in.A = Mat::Identity(a.dims, a.dims);
    else throw ValidationError("penalty: give --design or --dims");
    if (!(a.g0_scale > 0)) throw ValidationError("penalty: --g0-scale must be positive");
    in.G0_sq = a.g0_scale * a.g0_scale * Mat::Identity(in.A.cols(), in.A.cols());
    in.sigma_sq = a.sigma2;
    in.validate();
    std::vector<double> grid = a.w_grid;
    if (grid.empty())
        for (int i = 0; i <= 12; ++i) grid.push_back(std::pow(10.0, -3.0 + 0.5 * i));
    const PenaltyPath path = penalty_path(in, grid);
    CsvTable t({"method", "w", "p_w", "risk"});
    for (std::size_t i = 0; i < path.w_grid.size(); ++i)
        t.add_row({"grid", format_double(path.w_grid[i]), format_double(path.p_w[i]),
                   format_double(path.p_w[i] + path.w_grid[i])});
    const RiskSelection rs = select_w_risk(in);
    t.add_row({rs.fallback_grid ? "risk_grid_fallback" : "risk", format_double(rs.w_star),
               format_double(effective_dim_w(in, rs.w_star)), format_double(rs.risk)});
    const double wb = select_w_balance(in, a.c0);
    const double pb = effective_dim_w(in, wb);
    t.add_row({"balance", format_double(wb), format_double(pb), format_double(pb + wb)});
    write_output(gl, t.str());
}

// ---- simulate-tails -------------------------------------------------------

struct SimArgs {
    std::string experiment = "tail_upper";
    std::string noise = "gaussian";
    std::string fixture = "linear";
    int p = 2, q = 20, n = 100;
    std::optional<int> replications;
    double sigma = 0.05;
    std::vector<double> x{1.0};
    double penalty_w = 0, xc_target = 2.5, g = 0, r0 = 0, risk_tolerance = 0;
    std::string meta;
};

int cmd_simulate(const Globals& gl, const SimArgs& a) {
    ExperimentConfig c;
    c.experiment = parse_experiment(a.experiment);
    c.noise = parse_noise(a.noise);
    c.fixture = a.fixture;
    c.seed = gl.seed;
    c.p = a.p;
    c.q = a.q;
    c.n = a.n;
    c.sigma = a.sigma;
    c.x_grid = a.x;
    c.penalty_w = a.penalty_w;
    c.xc_target = a.xc_target;
    c.g = a.g;
    c.r0 = a.r0;
    c.risk_tolerance = a.risk_tolerance;
    c.replications = a.replications ? *a.replications : (gl.quick ? 200 : 1000);
    if (c.experiment == ExperimentKind::estimation || c.experiment == ExperimentKind::risk) c.q = c.n;
    const Report rep = run_experiment(c);
    write_output(gl, rep.to_csv());
    std::string meta = a.meta;
    if (meta.empty() && gl.out != "-" && !gl.out.empty()) meta = gl.out + ".json";
    if (!meta.empty()) write_text(meta, rep.metadata_json());
    for (const auto& r : rep.rows)
        if (!r.pass) std::cerr << "row failed: " << r.label << " x=" << format_double(r.x) << "\n";
    return rep.all_pass() ? kExitOk : kExitAcceptance;
}

// ---- fit ------------------------------------------------------------------

struct FitArgs {
    std::string data;
    std::string fixture = "linear";
    int p = 2, n = 100;
    double sigma = 0.05;
    double penalty_w = 0.0;
    std::string penalty_select = "none";
    double c0 = 1.0;
    std::vector<double> init;
};

std::vector<double> numeric_column(const CsvData& d, int col) {
    std::vector<double> v;
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        if (static_cast<int>(d.rows[i].size()) <= col)
            throw ValidationError("data row " + std::to_string(i + 1) + " is too short");
        try {
            std::size_t used = 0;
            v.push_back(std::stod(d.rows[i][col], &used));
            if (used != d.rows[i][col].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ValidationError("data: non-numeric entry '" + d.rows[i][col] + "'");
        }
        if (!std::isfinite(v.back())) throw ValidationError("data: non-finite entry");
    }
    return v;
}

int cmd_fit(const Globals& gl, const FitArgs& a) {
    ModelPtr model;
    Vec y, start;
    if (!a.data.empty()) {
        const CsvData d = read_csv_file(a.data);
        const int ycol = d.column("y");
        if (ycol < 0) throw ValidationError("data: missing column 'y'");
        if (d.rows.empty()) throw ValidationError("data: no rows");
        std::vector<int> xcols;
        for (std::size_t j = 0; j < d.header.size(); ++j)
            if (d.header[j].rfind("x", 0) == 0) xcols.push_back(static_cast<int>(j));
        if (xcols.empty()) throw ValidationError("data: need at least one x column");
        const auto yv = numeric_column(d, ycol);
        y = Eigen::Map<const Vec>(yv.data(), static_cast<Eigen::Index>(yv.size()));
        const auto n = static_cast<Eigen::Index>(yv.size());
        if (a.fixture == "linear") {
            Mat psi(static_cast<Eigen::Index>(xcols.size()), n);
            for (std::size_t k = 0; k < xcols.size(); ++k) {
                const auto xv = numeric_column(d, xcols[k]);
                psi.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Vec>(xv.data(), n).transpose();
            }
            model = make_linear_model(psi);
            start = Vec::Zero(psi.rows());
        } else {
            if (xcols.size() != 1) throw ValidationError("data: fixture '" + a.fixture + "' takes one x column");
            const auto xv = numeric_column(d, xcols[0]);
            const Vec x = Eigen::Map<const Vec>(xv.data(), n);
            if (a.fixture == "sine") model = make_sine_model(x);
            else if (a.fixture == "expdecay") model = make_exp_decay_model(x);
            else throw ValidationError("fit: fixture '" + a.fixture + "' cannot take data");
            start = make_fixture(a.fixture, 2, 2).theta_star;
        }
    } else {
        const Fixture fx = make_fixture(a.fixture, a.p, a.n);
        model = fx.model;
        CounterRng rng(gl.seed, 0);
        y = fx.model->value(fx.theta_star) + a.sigma * draw_noise(rng, NoiseKind::gaussian, fx.model->n());
        start = fx.theta_star;
    }
    const int p = model->p();
    if (!a.init.empty()) {
        if (static_cast<int>(a.init.size()) != p) throw ValidationError("fit: --init needs " + std::to_string(p) + " values");
        start = Eigen::Map<const Vec>(a.init.data(), p);
    }
    if (!(a.sigma >= 0)) throw ValidationError("fit: --sigma must be >= 0");
    if (!(a.penalty_w >= 0)) throw ValidationError("fit: --penalty-w must be >= 0");

    CalmedProblem prob;
    prob.model = model;
    prob.smoother = identity_smoother(model->n());
    prob.Z = y;
    prob.local = make_local_set(*model, prob.smoother, start, 1e300);
    double w = a.penalty_w;
    if (a.penalty_select != "none") {
        PenaltyInputs in;
        in.A = smoothed_map(*model, prob.smoother, start).dmbar.transpose();
        in.G0_sq = Mat::Identity(p, p);
        in.sigma_sq = std::max(a.sigma * a.sigma, 1e-300);
        if (a.penalty_select == "risk") w = select_w_risk(in).w_star;
        else if (a.penalty_select == "balance") w = select_w_balance(in, a.c0);
        else throw ValidationError("fit: --penalty-select must be none, risk or balance");
    }
    prob.G_sq = w * Mat::Identity(p, p);
    FitOptions opt;
    opt.require_local = false;
    const FitResult fit = fit_profile(prob, start, opt);
    if (!fit.converged) throw NumericalError("fit: solver did not converge");

    const Mat v_sq = a.sigma * a.sigma * Mat::Identity(model->n(), model->n());
    const ScoreReport score = effective_dimension(prob, fit.theta, v_sq, 1.0);
    const BiasRiskReport br = bias_and_risk_bounds(prob, fit.theta, fit.theta, score, score.r_GG, SmoothnessConsts{});

    std::vector<std::string> header;
    for (int j = 0; j < p; ++j) header.push_back("theta_" + std::to_string(j + 1));
    header.insert(header.end(), {"iterations", "grad_norm", "penalty_w", "p_GG", "risk_prediction"});
    CsvTable t(header);
    std::vector<std::string> row;
    for (int j = 0; j < p; ++j) row.push_back(format_double(fit.theta(j)));
    row.insert(row.end(), {std::to_string(fit.iterations), format_double(fit.grad_norm), format_double(w),
                           format_double(score.p_GG), format_double(br.risk_prediction)});
    t.add_row(row);
    write_output(gl, t.str());
    return kExitOk;
}

// ---- verify ---------------------------------------------------------------

int cmd_verify(const Globals& gl) {
    VerifyOptions opt;
    opt.seed = gl.seed;
    opt.quick = gl.quick;
    const VerifyResult res = run_verify(opt, [](const CriterionResult& c) {
        std::cerr << (c.pass ? "PASS " : "FAIL ") << c.id << " " << c.name << "\n";
    });
    if (gl.out != "-" && !gl.out.empty()) write_text(gl.out, res.to_csv());
    std::cout << res.summary_table();
    for (const auto& c : res.items)
        if (!c.pass) std::cerr << "criterion " << c.id << " (" << c.name << ") failed: " << c.detail << "\n";
    return res.all_pass() ? kExitOk : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calming-based nonlinear regression toolkit"};
    app.name("calmreg");
    app.require_subcommand(1);
    app.fallthrough();
    Globals gl;
    app.add_option("--seed", gl.seed, "Random seed (default 0)");
    app.add_option("--out", gl.out, "Output CSV path, '-' for stdout");
    app.add_option("--config", gl.config, "Flat key=value file; command-line flags override it");
    app.add_flag("--quick", gl.quick, "Reduced replication counts");

    BoundsArgs ba;
    auto* bounds = app.add_subcommand("bounds", "Quadratic-form deviation quantiles and the crossover level");
    bounds->add_option("--dim-a", ba.dim_a, "Trace of B")->required();
    bounds->add_option("--v2", ba.v2, "Trace of B squared")->required();
    bounds->add_option("--bnorm", ba.bnorm, "Operator norm of B")->required();
    bounds->add_option("--g", ba.g, "Exponential-moment radius; enables the z_c columns (needs --bnorm 1)");
    bounds->add_option("--x", ba.x, "Comma-separated deviation levels")->required()->delimiter(',');

    TauArgs ta;
    auto* tau = app.add_subcommand("tau", "Tilted third and fourth cumulant bounds of a scalar law");
    tau->add_option("--law", ta.law, "gaussian, rademacher, uniform or tabulated");
    tau->add_option("--variance", ta.variance, "Variance of the gaussian law");
    tau->add_option("--points", ta.points, "Support points of a tabulated law")->delimiter(',');
    tau->add_option("--weights", ta.weights, "Masses of a tabulated law")->delimiter(',');
    tau->add_option("--g", ta.g, "Tilt range [0, g]");
    tau->add_option("--grid", ta.grid, "Number of tilt grid points");
    tau->add_option("--n", ta.n, "Sample size for i.i.d. scaling");

    PenaltyArgs pa;
    auto* penalty = app.add_subcommand("penalty", "Penalty path and weight selection");
    penalty->add_option("--design", pa.design, "CSV file holding the q x p design A (header row)");
    penalty->add_option("--dims", pa.dims, "Use A = I_p with this p instead of a design file");
    penalty->add_option("--g0-scale", pa.g0_scale, "G0 = s * I");
    penalty->add_option("--sigma2", pa.sigma2, "Noise variance");
    penalty->add_option("--c0", pa.c0, "Balance constant");
    penalty->add_option("--w-grid", pa.w_grid, "Comma-separated penalty weights for the path")->delimiter(',');

    SimArgs sa;
    auto* sim = app.add_subcommand("simulate-tails", "Seeded Monte Carlo experiments with CSV and JSON reports");
    sim->add_option("--experiment", sa.experiment, "tail_upper, tail_lower, tail_exp_regime, estimation or risk");
    sim->add_option("--noise", sa.noise, "gaussian, rademacher_scaled or uniform_scaled");
    sim->add_option("--fixture", sa.fixture, "linear, sine, expdecay or square");
    sim->add_option("--p", sa.p, "Parameter dimension");
    sim->add_option("--q", sa.q, "Noise dimension for tail experiments");
    sim->add_option("--n", sa.n, "Sample size");
    sim->add_option("--replications", sa.replications, "Replications (default 1000, 200 with --quick)");
    sim->add_option("--sigma", sa.sigma, "Noise scale");
    sim->add_option("--x", sa.x, "Comma-separated deviation levels")->delimiter(',');
    sim->add_option("--penalty-w", sa.penalty_w, "Penalty G^2 = w * I");
    sim->add_option("--xc-target", sa.xc_target, "Crossover level used to pick g");
    sim->add_option("--g", sa.g, "Explicit exponential-moment radius");
    sim->add_option("--r0", sa.r0, "Local-set radius (0: automatic)");
    sim->add_option("--risk-tolerance", sa.risk_tolerance, "Relative risk tolerance (0: automatic)");
    sim->add_option("--meta", sa.meta, "JSON sidecar path (default: <out>.json)");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit one dataset by the calmed profile estimator");
    fit->add_option("--data", fa.data, "CSV with columns y and x...; synthetic data when absent");
    fit->add_option("--fixture", fa.fixture, "linear, sine or expdecay");
    fit->add_option("--p", fa.p, "Parameter dimension of synthetic linear data");
    fit->add_option("--n", fa.n, "Sample size of synthetic data");
    fit->add_option("--sigma", fa.sigma, "Noise scale");
    fit->add_option("--penalty-w", fa.penalty_w, "Penalty G^2 = w * I");
    fit->add_option("--penalty-select", fa.penalty_select, "none, risk or balance");
    fit->add_option("--c0", fa.c0, "Balance constant");
    fit->add_option("--init", fa.init, "Comma-separated starting point")->delimiter(',');

    auto* verify = app.add_subcommand("verify", "Run the acceptance suite");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = merge_config(app, args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*bounds) cmd_bounds(gl, ba);
        else if (*tau) cmd_tau(gl, ta);
        else if (*penalty) cmd_penalty(gl, pa);
        else if (*sim) return cmd_simulate(gl, sa);
        else if (*fit) return cmd_fit(gl, fa);
        else if (*verify) return cmd_verify(gl);
        return kExitOk;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
