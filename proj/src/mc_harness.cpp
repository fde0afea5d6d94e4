#include "calmreg/mc_harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "calmreg/calming.hpp"
#include "calmreg/csv.hpp"
#include "calmreg/error.hpp"
#include "calmreg/qform_bounds.hpp"

namespace calmreg {

namespace {

constexpr const char* kVersion = "0.1.0";

double binom_stderr(double p, int n) { return std::sqrt(std::max(0.0, p * (1.0 - p)) / n); }

double quantile_sorted(const std::vector<double>& s, double prob) {
    if (s.empty()) return std::nan("");
    const auto k = static_cast<std::size_t>(std::ceil(prob * s.size()));
    return s[std::min(s.size() - 1, k == 0 ? 0 : k - 1)];
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

ExperimentKind parse_experiment(const std::string& s) {
    if (s == "tail_upper" || s == "upper") return ExperimentKind::tail_upper;
    if (s == "tail_lower" || s == "lower") return ExperimentKind::tail_lower;
    if (s == "tail_exp_regime" || s == "exp") return ExperimentKind::tail_exp_regime;
    if (s == "estimation") return ExperimentKind::estimation;
    if (s == "risk") return ExperimentKind::risk;
    throw ValidationError("unknown experiment '" + s + "'");
}

NoiseKind parse_noise(const std::string& s) {
    if (s == "gaussian") return NoiseKind::gaussian;
    if (s == "rademacher_scaled" || s == "rademacher") return NoiseKind::rademacher_scaled;
    if (s == "uniform_scaled" || s == "uniform") return NoiseKind::uniform_scaled;
    throw ValidationError("unknown noise '" + s + "'");
}

std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::tail_upper: return "tail_upper";
        case ExperimentKind::tail_lower: return "tail_lower";
        case ExperimentKind::tail_exp_regime: return "tail_exp_regime";
        case ExperimentKind::estimation: return "estimation";
        case ExperimentKind::risk: return "risk";
    }
    return "?";
}

std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::rademacher_scaled: return "rademacher_scaled";
        case NoiseKind::uniform_scaled: return "uniform_scaled";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (replications < 100) throw ValidationError("config: replications must be >= 100");
    if (x_grid.empty()) throw ValidationError("config: x_grid must be nonempty");
    const bool allow_zero = experiment == ExperimentKind::tail_upper;
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        if (!std::isfinite(x_grid[i]) || x_grid[i] < 0.0 || (!allow_zero && x_grid[i] == 0.0))
            throw ValidationError("config: x_grid entries must be positive");
        if (i && !(x_grid[i] > x_grid[i - 1])) throw ValidationError("config: x_grid must be sorted increasing");
    }
    if (q < 1 || n < 1 || p < 1) throw ValidationError("config: dimensions must be positive");
    if (!(sigma >= 0.0)) throw ValidationError("config: sigma must be >= 0");
    if (!(penalty_w >= 0.0)) throw ValidationError("config: penalty_w must be >= 0");
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream s;
    s << "experiment=" << to_string(experiment) << ";seed=" << seed << ";replications=" << replications
      << ";noise=" << to_string(noise) << ";fixture=" << fixture << ";p=" << p << ";q=" << q << ";n=" << n
      << ";sigma=" << format_double(sigma) << ";x=";
    for (std::size_t i = 0; i < x_grid.size(); ++i) s << (i ? "," : "") << format_double(x_grid[i]);
    s << ";penalty_w=" << format_double(penalty_w) << ";xc_target=" << format_double(xc_target)
      << ";g=" << format_double(g) << ";r0=" << format_double(r0)
      << ";risk_tolerance=" << format_double(risk_tolerance);
    return s.str();
}

std::string ExperimentConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
    return buf;
}

bool Report::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass; });
}

const ReportRow* Report::find(const std::string& label, double x) const {
    for (const auto& r : rows)
        if (r.label == label && (x < 0 || r.x == x)) return &r;
    return nullptr;
}

std::string Report::to_csv() const {
    CsvTable t({"label", "x", "theoretical", "empirical", "mc_stderr", "pass", "note"});
    for (const auto& r : rows)
        t.add_row({r.label, format_double(r.x), format_double(r.theoretical), format_double(r.empirical),
                   format_double(r.mc_stderr), r.pass ? "true" : "false", r.note});
    return t.str();
}

std::string Report::metadata_json() const {
    nlohmann::ordered_json j;
    j["experiment"] = to_string(config.experiment);
    j["seed"] = config.seed;
    j["config_hash"] = config.hash();
    j["config"] = config.canonical();
    j["replications"] = config.replications;
    j["rows"] = rows.size();
    j["all_pass"] = all_pass();
    j["threads"] = threads_used;
    j["wall_time_s"] = wall_time_s;
    j["versions"] = {{"calmreg", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    return j.dump(2) + "\n";
}

Fixture make_fixture(const std::string& name, int p, int n) {
    Fixture f;
    if (name == "linear") {
        f.model = make_linear_model(random_linear_design(p, n, 7));
        f.theta_star.resize(p);
        for (int j = 0; j < p; ++j) f.theta_star(j) = 1.0 / (j + 1);
    } else if (name == "sine") {
        if (p != 2) throw ValidationError("sine fixture has p = 2");
        // One full period, amplitude 5: with σ = 0.05 this keeps ω_𝔾 below 1/3.
        f.model = make_sine_model(design_grid(n, 0.0, 2.0 * std::acos(-1.0)));
        f.theta_star = Vec(2);
        f.theta_star << 5.0, 1.0;
    } else if (name == "expdecay") {
        if (p != 2) throw ValidationError("expdecay fixture has p = 2");
        f.model = make_exp_decay_model(design_grid(n, 0.0, 3.0));
        f.theta_star = Vec::Constant(2, 1.0);
    } else if (name == "square") {
        if (p != 1 || n != 1) throw ValidationError("square fixture has p = n = 1");
        f.model = make_square_model();
        f.theta_star = Vec::Constant(1, 1.0);
    } else {
        throw ValidationError("unknown fixture '" + name + "'");
    }
    return f;
}

int worker_count(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("CALMREG_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v <= 0) throw ValidationError("CALMREG_THREADS must be a positive integer");
        n = static_cast<int>(std::min<long>(n, v));
    }
    return std::min(n, 256);
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    const int workers = std::max(1, std::min(threads, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!first) first = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

Vec draw_noise(CounterRng& rng, NoiseKind kind, int dim) {
    Vec v(dim);
    static const double root3 = std::sqrt(3.0);
    for (int i = 0; i < dim; ++i) {
        switch (kind) {
            case NoiseKind::gaussian: v(i) = rng.normal(); break;
            case NoiseKind::rademacher_scaled: v(i) = rng.rademacher(); break;
            case NoiseKind::uniform_scaled: v(i) = root3 * (2.0 * rng.uniform() - 1.0); break;
        }
    }
    return v;
}

Report run_tail_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    Report rep;
    rep.config = cfg;
    rep.threads_used = worker_count(cfg.threads);
    const int r = cfg.replications;
    std::vector<double> norm_sq(r);
    parallel_for(r, rep.threads_used, [&](int i) {
        CounterRng rng(cfg.seed, static_cast<std::uint64_t>(i));
        norm_sq[i] = draw_noise(rng, cfg.noise, cfg.q).squaredNorm();
    });
    const SpectrumStats st = identity_stats(cfg.q);
    ExpTailSolution sol;
    if (cfg.experiment == ExperimentKind::tail_exp_regime) {
        const double g = cfg.g > 0 ? cfg.g : g_for_crossover(st, cfg.xc_target);
        sol = solve_xc(g, st);
    }
    for (double x : cfg.x_grid) {
        ReportRow row;
        row.x = x;
        long count = 0;
        switch (cfg.experiment) {
            case ExperimentKind::tail_upper: {
                const double thr = z_quantile(st, x).z_sq;
                for (double v : norm_sq) count += v > thr;
                row.label = "upper_exceedance";
                row.theoretical = std::exp(-x);
                row.note = "exp(-x)";
                break;
            }
            case ExperimentKind::tail_lower: {
                const LowerTail lt = lower_tail_threshold(st, x);
                for (double v : norm_sq) count += v < lt.threshold;
                row.label = "lower_exceedance";
                row.theoretical = 1.1 * std::exp(-x);
                row.note = lt.vacuous ? "1.1*exp(-x);vacuous" : "1.1*exp(-x)";
                break;
            }
            case ExperimentKind::tail_exp_regime: {
                const double thr = zc_quantile(sol, st, x);
                for (double v : norm_sq) count += std::sqrt(v) >= thr;
                row.label = "exp_regime_exceedance";
                row.theoretical = 3.0 * std::exp(-x);
                row.note = std::string("3*exp(-x);branch=") +
                           (zc_branch(sol, x) == TailBranch::gaussian ? "gaussian" : "exp") +
                           ";x_c=" + format_double(sol.x_c) + ";g=" + format_double(sol.g);
                break;
            }
            default:
                throw ValidationError("run_tail_experiment: not a tail experiment");
        }
        row.empirical = static_cast<double>(count) / r;
        row.mc_stderr = binom_stderr(row.empirical, r);
        row.pass = row.empirical <= row.theoretical + 3.0 * row.mc_stderr;
        rep.rows.push_back(row);
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

namespace {

struct CalmSetup {
    Fixture fix;
    CalmedProblem prob;
    Vec m_star;
    PopulationTarget target;
    ScoreReport score;
    SmoothnessConsts consts;
    double omega_plus = 0.0;
    Mat D_GG;
    double x = 1.0;
    bool c3_defined = true;
};

CalmSetup build_setup(const ExperimentConfig& cfg) {
    CalmSetup s;
    s.fix = make_fixture(cfg.fixture, cfg.p, cfg.n);
    const int p = s.fix.model->p(), n = s.fix.model->n();
    s.x = cfg.x_grid.front();
    s.m_star = s.fix.model->value(s.fix.theta_star);
    s.prob.model = s.fix.model;
    s.prob.smoother = identity_smoother(n);
    s.prob.G_sq = cfg.penalty_w * Mat::Identity(p, p);
    s.prob.Z = s.prob.smoother.phi * s.m_star;
    s.prob.local = make_local_set(*s.fix.model, s.prob.smoother, s.fix.theta_star, 1e300);
    s.target = population_target(s.prob, s.m_star);

    const Mat v_sq = cfg.sigma * cfg.sigma * (s.prob.smoother.phi * s.prob.smoother.phi.transpose());
    s.score = effective_dimension(s.prob, s.target.theta, v_sq, s.x);
    const SmoothedMap sm = smoothed_map(*s.fix.model, s.prob.smoother, s.target.theta);
    s.D_GG = sym_sqrt(sm.dmbar * sm.dmbar.transpose() + 2.0 * s.prob.G_sq);

    LocalSet around_star = make_local_set(*s.fix.model, s.prob.smoother, s.fix.theta_star, 1.0);
    double r0 = cfg.r0;
    if (!(r0 > 0)) r0 = 2.0 * s.score.r_GG + around_star.radius_of(s.target.theta);
    if (!(r0 > 0)) r0 = 1e-12;
    s.prob.local = make_local_set(*s.fix.model, s.prob.smoother, s.target.theta, r0);

    SamplingPlan plan;
    plan.seed = cfg.seed;
    const GradRegularity gr = check_grad_regularity(*s.fix.model, s.prob.smoother, s.prob.local, plan);
    s.omega_plus = gr.omega_plus;
    const double tau = std::max(estimate_tau(*s.fix.model, s.prob.smoother, s.prob.local, 2, plan),
                                estimate_tau(*s.fix.model, s.prob.smoother, s.prob.local, 3, plan));
    s.consts.tau = tau;
    s.consts.varrho = check_r0(r0, tau).varrho;
    try {
        s.consts.c3 = c3_constant(s.consts.varrho, s.omega_plus);
    } catch (const DomainError&) {
        s.consts.c3 = std::numeric_limits<double>::infinity();
        s.c3_defined = false;
    }
    return s;
}

void add_rate_row(Report& rep, const std::string& label, double x, double need, double rate, int r,
                  const std::string& note) {
    ReportRow row;
    row.label = label;
    row.x = x;
    row.theoretical = need;
    row.empirical = rate;
    row.mc_stderr = binom_stderr(rate, r);
    row.pass = rate >= need;
    row.note = note;
    rep.rows.push_back(row);
}

}  // namespace

Report run_estimation_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    Report rep;
    rep.config = cfg;
    rep.threads_used = worker_count(cfg.threads);
    const CalmSetup s = build_setup(cfg);
    const int r = cfg.replications;

    struct Rec {
        double fisher_ratio = 0, wilks_ratio = 0, fisher_resid = 0, wilks_resid = 0;
        bool fisher_ok = false, wilks_ok = false, converged = false, conc_exceed = false;
    };
    std::vector<Rec> recs(r);
    double omega = 0.0, fisher_factor = 0.0, wilks_factor = 0.0;
    {
        const FisherWilksReport probe =
            fisher_wilks_report(s.prob, s.target.theta, s.target.theta, Vec::Unit(s.prob.p(), 0), s.score.r_GG, s.consts);
        omega = probe.omega;
        fisher_factor = probe.fisher_bound;
        wilks_factor = probe.wilks_bound;
    }
    parallel_for(r, rep.threads_used, [&](int i) {
        CounterRng rng(cfg.seed, static_cast<std::uint64_t>(i));
        const Vec eps = cfg.sigma * draw_noise(rng, cfg.noise, s.prob.model->n());
        CalmedProblem prob = s.prob;
        const Vec eps_s = prob.smoother.phi * eps;
        prob.Z = prob.smoother.phi * s.m_star + eps_s;
        const FitResult fit = fit_profile(prob, s.target.theta);
        const Vec xi = effective_score(prob, s.target.theta, eps_s).xi_GG;
        const FisherWilksReport fw = fisher_wilks_report(prob, fit.theta, s.target.theta, xi, s.score.r_GG, s.consts);
        Rec& rec = recs[i];
        rec.converged = fit.converged;
        rec.fisher_resid = fw.fisher_resid;
        rec.wilks_resid = fw.wilks_resid;
        rec.fisher_ratio = fw.xi_norm > 0 ? fw.fisher_resid / fw.xi_norm : 0.0;
        rec.wilks_ratio = fw.xi_norm > 0 ? fw.wilks_resid / (fw.xi_norm * fw.xi_norm) : 0.0;
        rec.fisher_ok = fw.fisher_ok;
        rec.wilks_ok = fw.wilks_ok;
        const double dev = (s.D_GG * (fit.theta - s.target.theta)).norm();
        rec.conc_exceed = dev > (1.0 + fisher_factor) * s.score.r_GG;
    });

    int nonconv = 0, fok = 0, wok = 0, both = 0, conc = 0;
    double fmax = 0, wmax = 0;
    std::vector<double> fr, wr;
    for (const Rec& c : recs) {
        nonconv += !c.converged;
        fok += c.fisher_ok;
        wok += c.wilks_ok;
        both += c.fisher_ok && c.wilks_ok;
        conc += c.conc_exceed;
        fmax = std::max(fmax, c.fisher_resid);
        wmax = std::max(wmax, c.wilks_resid);
        fr.push_back(c.fisher_ratio);
        wr.push_back(c.wilks_ratio);
    }
    if (nonconv > 0.01 * r)
        throw NumericalError("estimation experiment: solver non-convergence rate " +
                             format_double(static_cast<double>(nonconv) / r) + " exceeds 1%");
    std::vector<double> frs = fr, wrs = wr;
    std::sort(frs.begin(), frs.end());
    std::sort(wrs.begin(), wrs.end());
    const double x = s.x;
    const double xi_scale = std::max(1.0, s.score.r_GG);

    ReportRow om{"omega_G", x, 1.0 / 3.0, omega, 0.0, omega <= 1.0 / 3.0 && s.c3_defined,
                 "tau=" + format_double(s.consts.tau) + ";varrho=" + format_double(s.consts.varrho) +
                     ";omega_plus=" + format_double(s.omega_plus) + ";r_GG=" + format_double(s.score.r_GG)};
    rep.rows.push_back(om);
    add_rate_row(rep, "fisher_within_bound", x, 0.95, static_cast<double>(fok) / r, r, "fraction of replications");
    add_rate_row(rep, "wilks_within_bound", x, 0.95, static_cast<double>(wok) / r, r, "fraction of replications");
    add_rate_row(rep, "both_within_bound", x, 0.95, static_cast<double>(both) / r, r, "fraction of replications");
    rep.rows.push_back({"fisher_ratio_median", x, 0.2, median(fr), 0.0, median(fr) <= 0.2, "residual/|xi|"});
    rep.rows.push_back({"fisher_ratio_p95", x, fisher_factor, quantile_sorted(frs, 0.95), 0.0,
                        quantile_sorted(frs, 0.95) <= fisher_factor + 1e-10, "bound factor 2(sqrt(2w)+rho)/(1-2rho)"});
    rep.rows.push_back({"wilks_ratio_p95", x, wilks_factor, quantile_sorted(wrs, 0.95), 0.0,
                        quantile_sorted(wrs, 0.95) <= wilks_factor + 1e-10, "bound factor w/(1-w)+rho/(1-2rho)"});
    const double cb = 3.0 * std::exp(-x);
    const double crate = static_cast<double>(conc) / r;
    const double cse = binom_stderr(std::min(1.0, cb), r);
    rep.rows.push_back({"concentration_exceedance", x, cb, crate, cse, crate <= cb + 3.0 * cse, "3*exp(-x)"});
    const bool linear = cfg.fixture == "linear";
    rep.rows.push_back({"fisher_resid_max", x, linear ? 1e-10 : fisher_factor * xi_scale, fmax, 0.0,
                        linear ? fmax <= 1e-10 : true, linear ? "quadratic case: exact" : "informational"});
    rep.rows.push_back({"wilks_resid_max", x, linear ? 1e-10 : wilks_factor * xi_scale * xi_scale, wmax, 0.0,
                        linear ? wmax <= 1e-10 : true, linear ? "quadratic case: exact" : "informational"});
    const double ncr = static_cast<double>(nonconv) / r;
    rep.rows.push_back({"nonconvergence_rate", x, 0.01, ncr, binom_stderr(ncr, r), ncr <= 0.01, "solver"});
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

Report run_risk_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    Report rep;
    rep.config = cfg;
    rep.threads_used = worker_count(cfg.threads);
    const CalmSetup s = build_setup(cfg);
    const int r = cfg.replications;
    const Mat v_sq = cfg.sigma * cfg.sigma * (s.prob.smoother.phi * s.prob.smoother.phi.transpose());
    const double z_omega = cfg.sigma > 0 ? z_quantile(spectrum_stats(v_sq), s.x).z : 0.0;
    const BiasRiskReport br = bias_and_risk_bounds(s.prob, s.fix.theta_star, s.target.theta, s.score, s.score.r_GG, s.consts);

    std::vector<double> loss(r);
    std::vector<char> in_omega(r), conv(r);
    parallel_for(r, rep.threads_used, [&](int i) {
        CounterRng rng(cfg.seed, static_cast<std::uint64_t>(i));
        const Vec eps = cfg.sigma * draw_noise(rng, cfg.noise, s.prob.model->n());
        CalmedProblem prob = s.prob;
        const Vec eps_s = prob.smoother.phi * eps;
        prob.Z = prob.smoother.phi * s.m_star + eps_s;
        const FitResult fit = fit_profile(prob, s.target.theta);
        loss[i] = (s.D_GG * (fit.theta - s.fix.theta_star)).squaredNorm();
        in_omega[i] = eps_s.norm() <= z_omega;
        conv[i] = fit.converged;
    });
    int k = 0, nonconv = 0;
    double sum = 0, sumsq = 0, all = 0;
    for (int i = 0; i < r; ++i) {
        nonconv += !conv[i];
        all += loss[i];
        if (!in_omega[i]) continue;
        ++k;
        sum += loss[i];
        sumsq += loss[i] * loss[i];
    }
    if (nonconv > 0.01 * r)
        throw NumericalError("risk experiment: solver non-convergence rate exceeds 1%");
    const double mean = k ? sum / k : std::nan("");
    const double var = k > 1 ? (sumsq - k * mean * mean) / (k - 1) : 0.0;
    const double tol = cfg.risk_tolerance > 0 ? cfg.risk_tolerance : (cfg.fixture == "linear" ? 0.03 : 0.15);
    const double pred = br.risk_prediction;
    const double rel = std::abs(mean - pred) / pred;
    const double x = s.x;
    rep.rows.push_back({"risk_trimmed_mean", x, pred, mean, std::sqrt(std::max(0.0, var) / std::max(1, k)),
                        rel <= tol, "p_GG+b_GG^2;rel_err=" + format_double(rel) + ";tol=" + format_double(tol)});
    rep.rows.push_back({"risk_untrimmed_mean", x, pred, all / r, 0.0, true, "informational"});
    const double frac = static_cast<double>(k) / r;
    const double need = 1.0 - 3.0 * std::exp(-x);
    rep.rows.push_back({"omega_fraction", x, need, frac, binom_stderr(frac, r),
                        frac + 3.0 * binom_stderr(std::clamp(need, 0.0, 1.0), r) >= need, "1-3*exp(-x)"});
    rep.rows.push_back({"effective_dimension", x, s.score.p_GG, s.score.p_GG, 0.0, true,
                        "b_GG=" + format_double(br.b_GG)});
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

Report run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.experiment) {
        case ExperimentKind::estimation: return run_estimation_experiment(cfg);
        case ExperimentKind::risk: return run_risk_experiment(cfg);
        default: return run_tail_experiment(cfg);
    }
}

}  // namespace calmreg
