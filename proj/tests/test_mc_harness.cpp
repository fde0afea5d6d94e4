#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>

#include "calmreg/error.hpp"
#include "calmreg/mc_harness.hpp"

using namespace calmreg;

namespace {

ExperimentConfig tail_cfg(int reps, int threads) {
    ExperimentConfig c;
    c.experiment = ExperimentKind::tail_upper;
    c.q = 20;
    c.replications = reps;
    c.x_grid = {0.0, 1.0, 2.0};
    c.threads = threads;
    c.seed = 17;
    return c;
}

struct EnvGuard {
    explicit EnvGuard(const char* v) {
        if (v) setenv("CALMREG_THREADS", v, 1);
        else unsetenv("CALMREG_THREADS");
    }
    ~EnvGuard() { unsetenv("CALMREG_THREADS"); }
};

}  // namespace

TEST_CASE("enum parsing round trips") {
    for (auto k : {ExperimentKind::tail_upper, ExperimentKind::tail_lower, ExperimentKind::tail_exp_regime,
                   ExperimentKind::estimation, ExperimentKind::risk})
        CHECK(parse_experiment(to_string(k)) == k);
    for (auto k : {NoiseKind::gaussian, NoiseKind::rademacher_scaled, NoiseKind::uniform_scaled})
        CHECK(parse_noise(to_string(k)) == k);
    CHECK_THROWS_AS(parse_experiment("nope"), ValidationError);
    CHECK_THROWS_AS(parse_noise("cauchy"), ValidationError);
}

TEST_CASE("config validation") {
    ExperimentConfig c = tail_cfg(100, 1);
    CHECK_NOTHROW(c.validate());
    c.replications = 99;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = tail_cfg(100, 1);
    c.x_grid = {2.0, 1.0};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.x_grid = {};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = tail_cfg(100, 1);
    c.experiment = ExperimentKind::tail_lower;
    CHECK_THROWS_AS(c.validate(), ValidationError);  // x = 0 only for the upper tail
    c = tail_cfg(100, 1);
    c.sigma = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = tail_cfg(100, 1);
    c.q = 0;
    CHECK_THROWS_AS(run_experiment(c), ValidationError);
}

TEST_CASE("config hash tracks content") {
    ExperimentConfig a = tail_cfg(100, 1), b = tail_cfg(100, 4);
    CHECK(a.hash() == b.hash());  // threads do not change results
    CHECK(a.hash().size() == 16);
    b.seed = 18;
    CHECK(a.hash() != b.hash());
    CHECK(a.canonical().find("seed=17") != std::string::npos);
}

TEST_CASE("fixtures") {
    const Fixture lin = make_fixture("linear", 3, 20);
    CHECK(lin.model->p() == 3);
    CHECK(lin.theta_star(2) == doctest::Approx(1.0 / 3.0));
    CHECK(make_fixture("sine", 2, 10).model->n() == 10);
    CHECK_THROWS_AS(make_fixture("sine", 3, 10), ValidationError);
    CHECK_THROWS_AS(make_fixture("square", 1, 2), ValidationError);
    CHECK_THROWS_AS(make_fixture("bogus", 1, 1), ValidationError);
}

TEST_CASE("noise laws have unit variance") {
    for (auto k : {NoiseKind::gaussian, NoiseKind::rademacher_scaled, NoiseKind::uniform_scaled}) {
        CounterRng rng(3, 0);
        const Vec v = draw_noise(rng, k, 40000);
        const double m = v.mean();
        const double var = v.squaredNorm() / v.size() - m * m;
        CHECK(std::abs(m) <= 0.02);
        CHECK(std::abs(var - 1.0) <= 0.03);
    }
    CounterRng rng(4, 0);
    const Vec r = draw_noise(rng, NoiseKind::rademacher_scaled, 100);
    CHECK(r.cwiseAbs().minCoeff() == 1.0);
}

TEST_CASE("worker count honours the environment cap") {
    {
        EnvGuard g(nullptr);
        CHECK(worker_count(3) == 3);
        CHECK(worker_count(0) >= 1);
        CHECK(worker_count(1000) == 256);
    }
    {
        EnvGuard g("2");
        CHECK(worker_count(8) == 2);
        CHECK(worker_count(1) == 1);
    }
    {
        EnvGuard g("abc");
        CHECK_THROWS_AS(worker_count(1), ValidationError);
    }
    {
        EnvGuard g("0");
        CHECK_THROWS_AS(worker_count(1), ValidationError);
    }
}

TEST_CASE("parallel_for covers every index and propagates errors") {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, 4, [&](int i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(50, 3, [](int i) {
                        if (i == 17) throw NumericalError("boom");
                    }),
                    NumericalError);
    std::atomic<int> n{0};
    parallel_for(0, 4, [&](int) { ++n; });
    CHECK(n == 0);
}

TEST_CASE("known exponential tail through the parallel pool") {
    // P(E > x) = e^{-x} for E ~ Exp(1); the exceedance frequency is unbiased.
    const int r = 40000;
    std::vector<double> draws(r);
    parallel_for(r, 3, [&](int i) {
        CounterRng rng(99, static_cast<std::uint64_t>(i));
        draws[i] = -std::log(rng.uniform());
    });
    for (double x : {0.5, 1.0, 2.0}) {
        int k = 0;
        for (double d : draws) k += d > x;
        const double p = std::exp(-x), se = std::sqrt(p * (1 - p) / r);
        CHECK(std::abs(static_cast<double>(k) / r - p) <= 4 * se);
    }
}

TEST_CASE("tail experiment is deterministic and thread independent") {
    EnvGuard g(nullptr);
    const Report a = run_experiment(tail_cfg(2000, 1));
    const Report b = run_experiment(tail_cfg(2000, 1));
    const Report c = run_experiment(tail_cfg(2000, 3));
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.to_csv() == c.to_csv());
    CHECK(c.threads_used == 3);
    CHECK(a.rows.size() == 3);
    CHECK(a.all_pass());
    const ReportRow* r0 = a.find("upper_exceedance", 0.0);
    REQUIRE(r0 != nullptr);
    CHECK(r0->theoretical == 1.0);
    CHECK(a.to_csv().rfind("label,x,theoretical,empirical,mc_stderr,pass,note\n", 0) == 0);
    CHECK(a.to_csv().find('\r') == std::string::npos);

    ExperimentConfig other = tail_cfg(2000, 1);
    other.seed = 18;
    CHECK(run_experiment(other).to_csv() != a.to_csv());
}

TEST_CASE("Monte Carlo standard error halves with four times the replications") {
    EnvGuard g(nullptr);
    const Report small = run_experiment(tail_cfg(2000, 1));
    const Report big = run_experiment(tail_cfg(8000, 1));
    const double ratio = small.find("upper_exceedance", 0.0)->mc_stderr / big.find("upper_exceedance", 0.0)->mc_stderr;
    CHECK(ratio >= 1.8);
    CHECK(ratio <= 2.2);
}

TEST_CASE("lower and exponential-regime tails") {
    EnvGuard g(nullptr);
    ExperimentConfig c = tail_cfg(1000, 1);
    c.experiment = ExperimentKind::tail_lower;
    c.x_grid = {1.0, 20.0};
    const Report lo = run_experiment(c);
    REQUIRE(lo.rows.size() == 2);
    CHECK(lo.all_pass());
    c.experiment = ExperimentKind::tail_exp_regime;
    c.noise = NoiseKind::rademacher_scaled;
    c.x_grid = {1.0, 3.0};
    const Report ex = run_experiment(c);
    CHECK(ex.all_pass());
    CHECK(ex.rows[0].note.find("x_c") != std::string::npos);
}

TEST_CASE("estimation and risk reports on a small linear fixture") {
    EnvGuard g(nullptr);
    ExperimentConfig c;
    c.experiment = ExperimentKind::estimation;
    c.fixture = "linear";
    c.p = 3;
    c.n = 60;
    c.sigma = 1.0;
    c.replications = 100;
    c.x_grid = {3.0};
    const Report e = run_experiment(c);
    REQUIRE(e.find("both_within_bound") != nullptr);
    CHECK(e.find("both_within_bound")->pass);
    CHECK(e.find("fisher_resid_max")->empirical <= 1e-10);
    CHECK(e.find("nonconvergence_rate")->empirical == 0.0);

    c.experiment = ExperimentKind::risk;
    c.penalty_w = 0.5;
    c.replications = 400;
    c.x_grid = {6.0};
    const Report r = run_experiment(c);
    REQUIRE(r.find("risk_trimmed_mean") != nullptr);
    CHECK(r.find("effective_dimension")->theoretical > 0.0);
    CHECK(r.find("omega_fraction")->empirical >= 0.99);
}

TEST_CASE("JSON sidecar") {
    EnvGuard g(nullptr);
    const Report a = run_experiment(tail_cfg(100, 2));
    const auto j = nlohmann::json::parse(a.metadata_json());
    for (const char* key : {"experiment", "seed", "config_hash", "config", "replications", "rows", "all_pass",
                            "threads", "wall_time_s", "versions"})
        CHECK(j.contains(key));
    CHECK(j["seed"] == 17);
    CHECK(j["config_hash"] == a.config.hash());
    CHECK(j["rows"] == 3);
    CHECK(j["threads"] == 2);
    CHECK(j["versions"].contains("eigen"));
    CHECK(j["wall_time_s"].get<double>() >= 0.0);
}
