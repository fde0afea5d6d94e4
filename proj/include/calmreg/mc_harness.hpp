#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "calmreg/model.hpp"
#include "calmreg/rng.hpp"

namespace calmreg {

enum class ExperimentKind { tail_upper, tail_lower, tail_exp_regime, estimation, risk };
enum class NoiseKind { gaussian, rademacher_scaled, uniform_scaled };

ExperimentKind parse_experiment(const std::string& s);
NoiseKind parse_noise(const std::string& s);
std::string to_string(ExperimentKind k);
std::string to_string(NoiseKind k);

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::tail_upper;
    std::uint64_t seed = 0;
    int replications = 1000;
    NoiseKind noise = NoiseKind::gaussian;
    std::string fixture = "linear";
    int p = 2;
    int q = 20;   // dimension of ξ for tail experiments
    int n = 100;  // observations for estimation and risk
    double sigma = 0.05;
    std::vector<double> x_grid{1.0};
    double penalty_w = 0.0;     // G² = w·I
    double xc_target = 2.5;     // crossover level used to pick g when g ≤ 0
    double g = 0.0;
    double r0 = 0.0;            // ≤ 0 selects 2·r_𝔾 + ‖D₀(θ*_G − θ*)‖
    double risk_tolerance = 0.0;  // ≤ 0 selects 3% for linear, 15% otherwise
    int threads = 0;            // ≤ 0 reads CALMREG_THREADS, then hardware

    void validate() const;
    std::string canonical() const;
    std::string hash() const;
};

struct ReportRow {
    std::string label;
    double x = 0.0;
    double theoretical = 0.0;
    double empirical = 0.0;
    double mc_stderr = 0.0;
    bool pass = false;
    std::string note;
};

struct Report {
    ExperimentConfig config;
    std::vector<ReportRow> rows;
    double wall_time_s = 0.0;
    int threads_used = 1;

    bool all_pass() const;
    const ReportRow* find(const std::string& label, double x = -1.0) const;
    std::string to_csv() const;
    std::string metadata_json() const;
};

// A well-specified regression fixture with its true parameter.
struct Fixture {
    ModelPtr model;
    Vec theta_star;
};

Fixture make_fixture(const std::string& name, int p, int n);

// Requested count, or hardware concurrency when ≤ 0, capped by CALMREG_THREADS.
int worker_count(int requested);
// Runs body(i) for i in [0, count) on a worker pool. Results must be written
// to per-index slots so the outcome does not depend on scheduling.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

Vec draw_noise(CounterRng& rng, NoiseKind kind, int dim);

Report run_tail_experiment(const ExperimentConfig& cfg);
Report run_estimation_experiment(const ExperimentConfig& cfg);
Report run_risk_experiment(const ExperimentConfig& cfg);
Report run_experiment(const ExperimentConfig& cfg);

}  // namespace calmreg
