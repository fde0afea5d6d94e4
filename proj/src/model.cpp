#include "calmreg/model.hpp"

#include <algorithm>
#include <cmath>

#include "calmreg/error.hpp"
#include "calmreg/rng.hpp"

namespace calmreg {

namespace {

double fd_step(int k, const Vec& theta, const Vec& u) {
    static constexpr double base[] = {0.0, 1e-6, 1e-4, 1e-3, 2e-3};
    const double un = u.norm();
    return base[k] * (1.0 + theta.norm()) / (un > 0 ? un : 1.0);
}

void require_order(int k) {
    if (k < 1 || k > 4) throw DomainError("directional derivative order must be in {1,2,3,4}");
}

class LinearModel final : public RegressionModel {
public:
    explicit LinearModel(Mat psi) : psi_(std::move(psi)) {}
    int p() const override { return static_cast<int>(psi_.rows()); }
    int n() const override { return static_cast<int>(psi_.cols()); }
    std::string name() const override { return "linear"; }
    Vec value(const Vec& theta) const override { return psi_.transpose() * theta; }
    Mat jacobian(const Vec&) const override { return psi_; }
    Vec directional(const Vec&, const Vec& u, int k) const override {
        require_order(k);
        return k == 1 ? Vec(psi_.transpose() * u) : Vec::Zero(n());
    }
    Mat weighted_hessian(const Vec&, const Vec&) const override { return Mat::Zero(p(), p()); }
    bool analytic_derivatives() const override { return true; }

private:
    Mat psi_;
};

// Models of the form θ₁·f(θ₂ xᵢ) share the line-derivative structure
// d^k/dt^k (a + tb) f((c + td)x) = a (dx)^k f⁽ᵏ⁾ + k b (dx)^{k−1} f⁽ᵏ⁻¹⁾.
class ExpDecayModel final : public RegressionModel {
public:
    explicit ExpDecayModel(Vec x) : x_(std::move(x)) {}
    int p() const override { return 2; }
    int n() const override { return static_cast<int>(x_.size()); }
    std::string name() const override { return "expdecay"; }
    Vec value(const Vec& th) const override { return th(0) * (-th(1) * x_.array()).exp().matrix(); }
    Mat jacobian(const Vec& th) const override {
        Mat j(2, n());
        const Eigen::ArrayXd e = (-th(1) * x_.array()).exp();
        j.row(0) = e.matrix().transpose();
        j.row(1) = (-th(0) * x_.array() * e).matrix().transpose();
        return j;
    }
    Vec directional(const Vec& th, const Vec& u, int k) const override {
        require_order(k);
        const Eigen::ArrayXd e = (-th(1) * x_.array()).exp();
        const Eigen::ArrayXd dx = -u(1) * x_.array();
        return (e * (th(0) * dx.pow(k) + k * u(0) * dx.pow(k - 1))).matrix();
    }
    Mat weighted_hessian(const Vec& th, const Vec& w) const override {
        const Eigen::ArrayXd e = (-th(1) * x_.array()).exp();
        Mat h(2, 2);
        h(0, 0) = 0.0;
        h(0, 1) = h(1, 0) = -(w.array() * x_.array() * e).sum();
        h(1, 1) = th(0) * (w.array() * x_.array().square() * e).sum();
        return h;
    }
    bool analytic_derivatives() const override { return true; }

private:
    Vec x_;
};

class SineModel final : public RegressionModel {
public:
    explicit SineModel(Vec x) : x_(std::move(x)) {}
    int p() const override { return 2; }
    int n() const override { return static_cast<int>(x_.size()); }
    std::string name() const override { return "sine"; }
    Vec value(const Vec& th) const override { return th(0) * (th(1) * x_.array()).sin().matrix(); }
    Mat jacobian(const Vec& th) const override {
        Mat j(2, n());
        j.row(0) = (th(1) * x_.array()).sin().matrix().transpose();
        j.row(1) = (th(0) * x_.array() * (th(1) * x_.array()).cos()).matrix().transpose();
        return j;
    }
    Vec directional(const Vec& th, const Vec& u, int k) const override {
        require_order(k);
        constexpr double half_pi = 1.57079632679489661923;
        const Eigen::ArrayXd arg = th(1) * x_.array();
        const Eigen::ArrayXd dx = u(1) * x_.array();
        const Eigen::ArrayXd fk = (arg + k * half_pi).sin();
        const Eigen::ArrayXd fk1 = (arg + (k - 1) * half_pi).sin();
        return (th(0) * dx.pow(k) * fk + k * u(0) * dx.pow(k - 1) * fk1).matrix();
    }
    Mat weighted_hessian(const Vec& th, const Vec& w) const override {
        const Eigen::ArrayXd arg = th(1) * x_.array();
        Mat h(2, 2);
        h(0, 0) = 0.0;
        h(0, 1) = h(1, 0) = (w.array() * x_.array() * arg.cos()).sum();
        h(1, 1) = -th(0) * (w.array() * x_.array().square() * arg.sin()).sum();
        return h;
    }
    bool analytic_derivatives() const override { return true; }

private:
    Vec x_;
};

class SquareModel final : public RegressionModel {
public:
    int p() const override { return 1; }
    int n() const override { return 1; }
    std::string name() const override { return "square"; }
    Vec value(const Vec& th) const override { return Vec::Constant(1, th(0) * th(0)); }
    Mat jacobian(const Vec& th) const override { return Mat::Constant(1, 1, 2.0 * th(0)); }
    Vec directional(const Vec& th, const Vec& u, int k) const override {
        require_order(k);
        if (k == 1) return Vec::Constant(1, 2.0 * th(0) * u(0));
        if (k == 2) return Vec::Constant(1, 2.0 * u(0) * u(0));
        return Vec::Zero(1);
    }
    Mat weighted_hessian(const Vec&, const Vec& w) const override {
        return Mat::Constant(1, 1, 2.0 * w(0));
    }
    bool analytic_derivatives() const override { return true; }
};

}  // namespace

Vec RegressionModel::directional(const Vec& theta, const Vec& u, int k) const {
    require_order(k);
    const double s = fd_step(k, theta, u);
    auto h = [&](double t) { return value(theta + t * u); };
    switch (k) {
        case 1: return (h(s) - h(-s)) / (2.0 * s);
        case 2: return (h(s) - 2.0 * h(0.0) + h(-s)) / (s * s);
        case 3: return (h(2 * s) - 2.0 * h(s) + 2.0 * h(-s) - h(-2 * s)) / (2.0 * s * s * s);
        default:
            return (h(2 * s) - 4.0 * h(s) + 6.0 * h(0.0) - 4.0 * h(-s) + h(-2 * s)) / (s * s * s * s);
    }
}

Mat RegressionModel::weighted_hessian(const Vec& theta, const Vec& w) const {
    const int d = p();
    Mat h(d, d);
    const double s = 1e-5 * (1.0 + theta.norm());
    for (int j = 0; j < d; ++j) {
        Vec tp = theta, tm = theta;
        tp(j) += s;
        tm(j) -= s;
        h.col(j) = (jacobian(tp) * w - jacobian(tm) * w) / (2.0 * s);
    }
    return symmetrize(h);
}

ModelPtr make_linear_model(const Mat& psi) { return std::make_shared<LinearModel>(psi); }
ModelPtr make_exp_decay_model(const Vec& x) { return std::make_shared<ExpDecayModel>(x); }
ModelPtr make_sine_model(const Vec& x) { return std::make_shared<SineModel>(x); }
ModelPtr make_square_model() { return std::make_shared<SquareModel>(); }

Vec design_grid(int n, double lo, double hi) {
    if (n < 1) throw ValidationError("design_grid: n must be >= 1");
    if (n == 1) return Vec::Constant(1, lo);
    return Vec::LinSpaced(n, lo, hi);
}

Mat random_linear_design(int p, int n, std::uint64_t seed) {
    if (p < 1 || n < p) throw ValidationError("random_linear_design: need 1 <= p <= n");
    CounterRng rng(seed, 0x11);
    Mat g(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(n, p);
    return std::sqrt(static_cast<double>(n)) * q.transpose();
}

Smoother identity_smoother(int n) {
    Smoother s;
    s.kind = SmootherKind::identity;
    s.phi = Mat::Identity(n, n);
    return s;
}

Smoother random_projection_smoother(int q, int n, std::uint64_t seed) {
    if (q < 1 || n < 1) throw ValidationError("random projection: q and n must be positive");
    CounterRng rng(seed, 0x22);
    Smoother s;
    s.kind = SmootherKind::random_projection;
    s.phi.resize(q, n);
    const double sd = 1.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < q; ++i) s.phi(i, j) = sd * rng.normal();
    const double count = static_cast<double>(q) * n;
    const double mean = s.phi.mean();
    const double var = s.phi.squaredNorm() / count;
    const double v0 = 1.0 / n;
    if (std::abs(mean) > 5.0 * std::sqrt(v0 / count) ||
        std::abs(var - v0) > 5.0 * v0 * std::sqrt(2.0 / count))
        throw ValidationError("random projection: empirical moments outside five standard errors");
    return s;
}

Smoother tangent_smoother(const RegressionModel& model, const Vec& theta0) {
    Smoother s;
    s.kind = SmootherKind::tangent;
    s.phi = model.jacobian(theta0);
    s.theta0 = theta0;
    return s;
}

SmoothedMap smoothed_map(const RegressionModel& model, const Smoother& sm, const Vec& theta) {
    if (theta.size() != model.p()) throw ValidationError("smoothed_map: theta has wrong dimension");
    if (sm.phi.cols() != model.n()) throw ValidationError("smoothed_map: smoother/model dimension mismatch");
    return {sm.phi * model.value(theta), model.jacobian(theta) * sm.phi.transpose()};
}

double LocalSet::radius_of(const Vec& theta) const {
    const Vec d = theta - theta0;
    return c_ring * std::sqrt(std::max(0.0, d.dot(D0_sq * d)));
}

bool LocalSet::contains(const Vec& theta) const { return radius_of(theta) <= r0 * (1.0 + 1e-12); }

LocalSet make_local_set(const RegressionModel& model, const Smoother& sm, const Vec& theta0,
                        double r0, double c_ring) {
    if (!(r0 > 0.0) || !(c_ring > 0.0)) throw ValidationError("local set: r0 and c_ring must be > 0");
    const SmoothedMap sm0 = smoothed_map(model, sm, theta0);
    LocalSet l;
    l.theta0 = theta0;
    l.D0_sq = sm0.dmbar * sm0.dmbar.transpose();
    l.r0 = r0;
    l.c_ring = c_ring;
    return l;
}

double check_phi_condition(const RegressionModel& model, const Smoother& sm,
                           const std::vector<Vec>& theta_samples) {
    const Mat gram = sm.phi * sm.phi.transpose();
    const Vec sv = sym_eigenvalues(gram);
    if (sv.size() == 0 || std::sqrt(std::max(0.0, sv.minCoeff())) <= 1e-10)
        throw ValidationError("phi condition: smoother is not of full row rank");
    const Mat proj = sm.phi.transpose() * spd_solve(gram, sm.phi, "phi condition");
    double c_phi = 1.0;
    for (const Vec& th : theta_samples) {
        const Mat j = model.jacobian(th);
        const Mat a = j * j.transpose();
        const Mat b = symmetrize(j * proj * j.transpose());
        if (sym_min_eig(b) <= 1e-12 * std::max(b.trace(), 1e-300))
            throw NumericalError("phi condition: projected Gram matrix is singular");
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(symmetrize(a), b, Eigen::EigenvaluesOnly);
        c_phi = std::max(c_phi, ges.eigenvalues().maxCoeff());
    }
    return c_phi;
}

namespace {

std::vector<double> radius_ladder() {
    std::vector<double> f{1.0};
    for (int k = 0; k <= 6; ++k)
        for (int m = 4; m <= 7; ++m) f.push_back(m / 8.0 * std::ldexp(1.0, -k));
    return f;
}

Vec apply_phi(const Smoother& sm, const Vec& v) {
    return sm.kind == SmootherKind::identity ? v : Vec(sm.phi * v);
}

Vec unit_direction(CounterRng& rng, int d) {
    Vec v(d);
    double nrm = 0.0;
    while (nrm < 1e-12) {
        for (int i = 0; i < d; ++i) v(i) = rng.normal();
        nrm = v.norm();
    }
    return v / nrm;
}

struct RaySample {
    Vec theta;
    int ray;
};

std::vector<RaySample> ray_samples(const LocalSet& local, const SamplingPlan& plan) {
    const int d = static_cast<int>(local.theta0.size());
    const Mat d0_inv = sym_inv_sqrt(local.D0_sq);
    const std::vector<double> ladder = radius_ladder();
    std::vector<RaySample> out;
    out.push_back({local.theta0, -1});
    for (int r = 0; r < plan.rays; ++r) {
        CounterRng rng(plan.seed, 0x1000000ULL + r);
        const Vec v = d0_inv * unit_direction(rng, d);
        for (double f : ladder) out.push_back({local.theta0 + (local.r0 / local.c_ring) * f * v, r});
    }
    return out;
}

std::vector<Vec> ray_directions(const SamplingPlan& plan, int ray, int d) {
    CounterRng rng(plan.seed, 0x2000000ULL + static_cast<std::uint64_t>(ray + 1));
    std::vector<Vec> dirs;
    for (int i = 0; i < plan.directions; ++i) dirs.push_back(unit_direction(rng, d));
    return dirs;
}

}  // namespace

std::vector<Vec> local_samples(const LocalSet& local, const SamplingPlan& plan) {
    std::vector<Vec> out;
    for (auto& s : ray_samples(local, plan)) out.push_back(s.theta);
    return out;
}

GradRegularity check_grad_regularity(const RegressionModel& model, const Smoother& sm,
                                     const LocalSet& local, const SamplingPlan& plan) {
    if (sym_min_eig(local.D0_sq) <= 0.0) throw NumericalError("grad regularity: D0^2 is singular");
    const int d = model.p();
    const Mat d0_inv = sym_inv_sqrt(local.D0_sq);
    GradRegularity out;
    for (const RaySample& s : ray_samples(local, plan)) {
        const SmoothedMap mm = smoothed_map(model, sm, s.theta);
        const Mat dsq = mm.dmbar * mm.dmbar.transpose();
        const Vec lam = sym_eigenvalues(d0_inv * dsq * d0_inv);
        out.omega_plus = std::max({out.omega_plus, lam.maxCoeff() - 1.0, 1.0 - lam.minCoeff()});
        for (const Vec& u : ray_directions(plan, s.ray, d)) {
            const double den = u.dot(dsq * u);
            const double num = apply_phi(sm, model.directional(s.theta, u, 2)).cwiseAbs().sum();
            if (num == 0.0) continue;
            if (!(den > 0.0)) throw NumericalError("grad regularity: D(theta) is singular at a sample");
            out.c2 = std::max(out.c2, num / den);
        }
    }
    return out;
}

double estimate_tau(const RegressionModel& model, const Smoother& sm, const LocalSet& local, int k,
                    const SamplingPlan& plan) {
    if (k < 2 || k > 4) throw DomainError("estimate_tau: k must be in {2,3,4}");
    const int d = model.p();
    double tau = 0.0;
    for (const RaySample& s : ray_samples(local, plan)) {
        const SmoothedMap mm = smoothed_map(model, sm, s.theta);
        const Mat dsq = mm.dmbar * mm.dmbar.transpose();
        for (const Vec& u : ray_directions(plan, s.ray, d)) {
            const double num = apply_phi(sm, model.directional(s.theta, u, k)).squaredNorm();
            if (num == 0.0) continue;
            const double den = u.dot(dsq * u);
            if (!(den > 0.0)) throw NumericalError("estimate_tau: D(theta) is singular at a sample");
            tau = std::max(tau, std::pow(num, 1.0 / (2.0 * k - 2.0)) / std::pow(den, k / (2.0 * k - 2.0)));
        }
    }
    return tau;
}

R0Check check_r0(double r0, double tau) {
    R0Check c;
    c.varrho = 2.0 * r0 * tau;
    c.pass = c.varrho < 0.5;
    return c;
}

ImageIncrement image_increment_check(const RegressionModel& model, const Smoother& sm,
                                     const LocalSet& local, const Vec& theta, double omega_plus) {
    if (!local.contains(theta)) throw DomainError("image_increment_check: theta outside the local set");
    const Vec diff = sm.phi * (model.value(theta) - model.value(local.theta0));
    const Vec d = theta - local.theta0;
    ImageIncrement r;
    r.lhs = diff.squaredNorm();
    r.rhs = (1.0 + omega_plus) * d.dot(local.D0_sq * d);
    r.holds = r.lhs <= r.rhs * (1.0 + 1e-12) + 1e-300;
    return r;
}

}  // namespace calmreg
