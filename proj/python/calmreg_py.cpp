#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "calmreg/calming.hpp"
#include "calmreg/error.hpp"
#include "calmreg/mc_harness.hpp"
#include "calmreg/penalty.hpp"
#include "calmreg/qform_bounds.hpp"
#include "calmreg/tilted_moments.hpp"
#include "calmreg/verify.hpp"

namespace py = pybind11;
using namespace calmreg;

namespace {

ScalarLaw law_from_name(const std::string& name, double variance, const std::vector<double>& points,
                        const std::vector<double>& weights) {
    if (name == "gaussian") return gaussian_law(variance);
    if (name == "rademacher") return rademacher_law();
    if (name == "uniform") return centered_uniform_law();
    if (name == "tabulated") return tabulated_law(points, weights);
    throw ValidationError("unknown law '" + name + "'");
}

py::dict fit_dict(const FitResult& f) {
    py::dict d;
    d["theta"] = f.theta;
    d["eta"] = f.eta;
    d["trace"] = f.trace;
    d["iterations"] = f.iterations;
    d["grad_norm"] = f.grad_norm;
    d["converged"] = f.converged;
    return d;
}

}  // namespace

PYBIND11_MODULE(_calmreg, m) {
    m.doc() = "Calming-based nonlinear regression toolkit";

    static py::exception<ValidationError> validation(m, "ValidationError", PyExc_ValueError);
    static py::exception<DomainError> domain(m, "DomainError", PyExc_ValueError);
    static py::exception<NumericalError> numerical(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            py::set_error(validation, e.what());
        } catch (const DomainError& e) {
            py::set_error(domain, e.what());
        } catch (const NumericalError& e) {
            py::set_error(numerical, e.what());
        }
    });

    py::class_<SpectrumStats>(m, "SpectrumStats")
        .def(py::init(&make_stats), py::arg("dim_a"), py::arg("v2"), py::arg("b_norm"))
        .def_readonly("dim_a", &SpectrumStats::dim_a)
        .def_readonly("v2", &SpectrumStats::v2)
        .def_readonly("b_norm", &SpectrumStats::b_norm)
        .def_static("from_matrix", &spectrum_stats, py::arg("b"))
        .def_static("identity", &identity_stats, py::arg("d"));

    m.def("z_quantile", [](const SpectrumStats& s, double x) {
        const ZQuantile z = z_quantile(s, x);
        return py::make_tuple(z.z_sq, z.z);
    }, py::arg("stats"), py::arg("x"), "(z², z) for level x.");

    py::class_<ExpTailSolution>(m, "ExpTailSolution")
        .def_readonly("x_c", &ExpTailSolution::x_c)
        .def_readonly("mu_c", &ExpTailSolution::mu_c)
        .def_readonly("g_c", &ExpTailSolution::g_c)
        .def_readonly("g", &ExpTailSolution::g)
        .def_readonly("residual", &ExpTailSolution::residual);
    m.def("solve_xc", &solve_xc, py::arg("g"), py::arg("stats"));
    m.def("g_for_crossover", &g_for_crossover, py::arg("stats"), py::arg("x_target"));
    m.def("zc_quantile", &zc_quantile, py::arg("solution"), py::arg("stats"), py::arg("x"));
    m.def("lower_tail_threshold", [](const SpectrumStats& s, double x) {
        const LowerTail lt = lower_tail_threshold(s, x);
        return py::make_tuple(lt.threshold, lt.vacuous);
    }, py::arg("stats"), py::arg("x"));

    m.def("tau34", [](const std::string& law, double g, double variance, const std::vector<double>& points,
                      const std::vector<double>& weights, int grid) {
        const TiltedSummary s = tau34(law_from_name(law, variance, points, weights), g, grid);
        py::dict d;
        d["g"] = s.g;
        d["tau3"] = s.tau3;
        d["tau4"] = s.tau4;
        d["subg_const"] = s.subg_const;
        return d;
    }, py::arg("law"), py::arg("g"), py::arg("variance") = 1.0, py::arg("points") = std::vector<double>{},
       py::arg("weights") = std::vector<double>{}, py::arg("grid") = 256);

    m.def("effective_dim_w", [](const Mat& a, const Mat& g0, double sigma_sq, double w) {
        return effective_dim_w(PenaltyInputs{a, g0, sigma_sq}, w);
    }, py::arg("A"), py::arg("G0_sq"), py::arg("sigma_sq"), py::arg("w"));
    m.def("select_w_risk", [](const Mat& a, const Mat& g0, double sigma_sq) {
        const RiskSelection s = select_w_risk(PenaltyInputs{a, g0, sigma_sq});
        return py::make_tuple(s.w_star, s.risk);
    }, py::arg("A"), py::arg("G0_sq"), py::arg("sigma_sq"));
    m.def("select_w_balance", [](const Mat& a, const Mat& g0, double sigma_sq, double c0) {
        return select_w_balance(PenaltyInputs{a, g0, sigma_sq}, c0);
    }, py::arg("A"), py::arg("G0_sq"), py::arg("sigma_sq"), py::arg("c0"));

    m.def("fit", [](const std::string& model, const Vec& y, const Mat& design, const Vec& init, double w) {
        ModelPtr mp;
        if (model == "linear") mp = make_linear_model(design);
        else if (model == "sine") mp = make_sine_model(design.reshaped());
        else if (model == "expdecay") mp = make_exp_decay_model(design.reshaped());
        else throw ValidationError("unknown model '" + model + "'");
        CalmedProblem prob;
        prob.model = mp;
        prob.smoother = identity_smoother(mp->n());
        prob.G_sq = w * Mat::Identity(mp->p(), mp->p());
        prob.Z = y;
        prob.local = make_local_set(*mp, prob.smoother, init, 1e300);
        return fit_dict(fit_profile(prob, init));
    }, py::arg("model"), py::arg("y"), py::arg("design"), py::arg("init"), py::arg("penalty_w") = 0.0,
       "Calmed profile fit. design is the p×n matrix for linear, the n design points otherwise.");

    m.def("run_experiment", [](const std::string& experiment, std::uint64_t seed, int replications,
                               const std::string& noise, const std::string& fixture, int p, int q, int n,
                               double sigma, const std::vector<double>& x, double penalty_w, int threads) {
        ExperimentConfig c;
        c.experiment = parse_experiment(experiment);
        c.seed = seed;
        c.replications = replications;
        c.noise = parse_noise(noise);
        c.fixture = fixture;
        c.p = p;
        c.q = q;
        c.n = n;
        c.sigma = sigma;
        c.x_grid = x;
        c.penalty_w = penalty_w;
        c.threads = threads;
        Report r;
        {
            py::gil_scoped_release nogil;
            r = run_experiment(c);
        }
        return py::make_tuple(r.to_csv(), r.metadata_json());
    }, py::arg("experiment"), py::arg("seed") = 0, py::arg("replications") = 1000, py::arg("noise") = "gaussian",
       py::arg("fixture") = "linear", py::arg("p") = 2, py::arg("q") = 20, py::arg("n") = 100,
       py::arg("sigma") = 0.05, py::arg("x") = std::vector<double>{1.0}, py::arg("penalty_w") = 0.0,
       py::arg("threads") = 0, "Returns (csv, metadata_json).");

    m.def("run_criterion", [](int id, std::uint64_t seed, bool quick) {
        for (const auto& e : criteria())
            if (e.id == id) {
                const CriterionResult r = run_criterion(e, VerifyOptions{seed, quick, 0});
                return py::make_tuple(r.pass, r.value, r.threshold, r.detail);
            }
        throw ValidationError("no criterion with id " + std::to_string(id));
    }, py::arg("id"), py::arg("seed") = 0, py::arg("quick") = true);
}
