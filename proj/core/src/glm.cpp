#include "rap/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rap {

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

std::string_view Family::name() const {
    return kind_ == FamilyKind::gaussian ? "gaussian" : "binomial";
}

Family parse_family(std::string_view name) {
    if (name == "gaussian") return Family::gaussian();
    if (name == "binomial") return Family::binomial();
    throw std::invalid_argument("unknown family '" + std::string(name) +
                                "' (expected gaussian or binomial)");
}

double Family::link(double mu) const {
    if (kind_ == FamilyKind::gaussian) return mu;
    return std::log(mu / (1.0 - mu));
}

double Family::inverse_link(double eta) const {
    if (kind_ == FamilyKind::gaussian) return eta;
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double Family::variance(double mu) const {
    return kind_ == FamilyKind::gaussian ? 1.0 : mu * (1.0 - mu);
}

double Family::dmu_deta(double eta) const {
    if (kind_ == FamilyKind::gaussian) return 1.0;
    const double mu = inverse_link(eta);
    return mu * (1.0 - mu);
}

double Family::cumulant(double theta) const {
    return kind_ == FamilyKind::gaussian ? 0.5 * theta * theta : softplus(theta);
}

double Family::working_weight(double eta) const {
    if (kind_ == FamilyKind::gaussian) return 1.0;
    // Canonical link: (dmu/deta)^2 / V = V.
    return dmu_deta(eta);
}

void Family::validate_response(double y) const {
    if (!std::isfinite(y)) throw DataError("non-finite response");
    if (kind_ == FamilyKind::binomial && y != 0.0 && y != 1.0) {
        throw DataError("binomial response must be 0 or 1, got " + std::to_string(y));
    }
}

double Family::objective_term(double y, double eta) const {
    if (kind_ == FamilyKind::gaussian) return 0.5 * eta * eta - y * eta;
    return nll_eta(y, eta);
}

double Family::nll_eta(double y, double eta) const {
    validate_response(y);
    if (kind_ == FamilyKind::gaussian) {
        const double r = y - eta;
        return r * r;
    }
    // softplus(eta) - y eta, arranged so the y = 1 branch does not cancel.
    return y == 1.0 ? softplus(-eta) : softplus(eta);
}

double Family::nll(const Eigen::Ref<const Vector>& x, double y,
                   const Eigen::Ref<const Vector>& beta) const {
    if (x.size() != beta.size()) throw std::invalid_argument("nll: dimension mismatch");
    return nll_eta(y, x.dot(beta));
}

Vector Family::nll_grad_beta(const Eigen::Ref<const Vector>& x, double y,
                             const Eigen::Ref<const Vector>& beta) const {
    if (x.size() != beta.size()) throw std::invalid_argument("nll_grad_beta: dimension mismatch");
    validate_response(y);
    const double eta = x.dot(beta);
    if (kind_ == FamilyKind::gaussian) return -2.0 * (y - eta) * x;
    return (inverse_link(eta) - y) * x;
}

ObsBuffer::ObsBuffer(Index p, double r, double min_weight) : p_(p), r_(r) {
    if (p < 1) throw std::invalid_argument("ObsBuffer: dimension must be >= 1");
    if (!(r > 0.0 && r <= 1.0)) {
        throw std::invalid_argument("ObsBuffer: forgetting factor must lie in (0, 1]");
    }
    if (!(min_weight > 0.0 && min_weight < 1.0)) {
        throw std::invalid_argument("ObsBuffer: min_weight must lie in (0, 1)");
    }
    if (r == 1.0) {
        capacity_ = std::numeric_limits<std::size_t>::max();
    } else {
        const double len = std::ceil(std::log(min_weight) / std::log(r));
        capacity_ = static_cast<std::size_t>(std::max(1.0, len));
    }
}

void ObsBuffer::push(const Eigen::Ref<const Vector>& x, double y) {
    if (x.size() != p_) throw std::invalid_argument("ObsBuffer::push: dimension mismatch");
    if (!x.allFinite() || !std::isfinite(y)) throw DataError("ObsBuffer::push: non-finite observation");
    xs_.emplace_back(x);
    ys_.push_back(y);
    while (ys_.size() > capacity_) {
        xs_.pop_front();
        ys_.pop_front();
    }
}

Matrix ObsBuffer::design() const {
    Matrix X(static_cast<Index>(xs_.size()), p_);
    for (std::size_t i = 0; i < xs_.size(); ++i) X.row(static_cast<Index>(i)) = xs_[i].transpose();
    return X;
}

Vector ObsBuffer::responses() const {
    Vector y(static_cast<Index>(ys_.size()));
    for (std::size_t i = 0; i < ys_.size(); ++i) y[static_cast<Index>(i)] = ys_[i];
    return y;
}

Vector ObsBuffer::weights() const {
    const auto n = static_cast<Index>(ys_.size());
    Vector w(n);
    double current = 1.0;
    for (Index i = n - 1; i >= 0; --i) {
        w[i] = current;
        current *= r_;
    }
    return w;
}

namespace glm {

namespace {

void check_shapes(const Matrix& X, const Vector& y, const Vector& w) {
    if (y.size() != X.rows() || w.size() != X.rows()) {
        throw std::invalid_argument("glm: design, response and weight lengths differ");
    }
}

} // namespace

double objective(const Matrix& X, const Vector& y, const Vector& w, const Family& family,
                 const Vector& beta, double lambda) {
    check_shapes(X, y, w);
    const Vector eta = X * beta;
    double total = 0.0;
    for (Index i = 0; i < eta.size(); ++i) total += w[i] * family.objective_term(y[i], eta[i]);
    return total + lambda * beta.lpNorm<1>();
}

Vector score(const Matrix& X, const Vector& y, const Vector& w, const Family& family,
             const Vector& beta) {
    check_shapes(X, y, w);
    const Vector eta = X * beta;
    Vector r(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
        const double mu = family.inverse_link(eta[i]);
        // Canonical link: (dmu/deta) / V = 1.
        r[i] = w[i] * (y[i] - mu);
    }
    return X.transpose() * r;
}

Matrix curvature(const Matrix& X, const Vector& w, const Family& family, const Vector& beta) {
    if (w.size() != X.rows()) throw std::invalid_argument("glm::curvature: weight length mismatch");
    const Vector eta = X * beta;
    Vector v(eta.size());
    for (Index i = 0; i < eta.size(); ++i) v[i] = w[i] * family.working_weight(eta[i]);
    Matrix H = X.transpose() * v.asDiagonal() * X;
    return 0.5 * (H + H.transpose());
}

double lambda_max(const Matrix& X, const Vector& y, const Vector& w, const Family& family) {
    return lasso::lambda_max(score(X, y, w, family, Vector::Zero(X.cols())));
}

double kkt_violation(const Matrix& X, const Vector& y, const Vector& w, const Family& family,
                     const Vector& beta, double lambda) {
    return lasso::kkt_violation(Vector(-score(X, y, w, family, beta)), beta, lambda);
}

LassoFit fit(const Matrix& X, const Vector& y, const Vector& w, const Family& family,
             double lambda, const Vector& start, const IrlsOptions& options) {
    check_shapes(X, y, w);
    if (start.size() != X.cols()) throw std::invalid_argument("glm::fit: start has wrong length");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("glm::fit: lambda must be finite and >= 0");
    }
    for (Index i = 0; i < y.size(); ++i) family.validate_response(y[i]);

    LassoFit out;
    out.lambda = lambda;
    Vector beta = start;
    double current = objective(X, y, w, family, beta, lambda);

    for (int round = 1; round <= options.max_outer; ++round) {
        out.iterations = round;
        const Vector eta = X * beta;
        Vector v(eta.size());
        Vector vz(eta.size());
        for (Index i = 0; i < eta.size(); ++i) {
            const double mu = family.inverse_link(eta[i]);
            v[i] = w[i] * family.working_weight(eta[i]);
            vz[i] = v[i] * eta[i] + w[i] * (y[i] - mu);
        }
        Matrix A = X.transpose() * v.asDiagonal() * X;
        A = 0.5 * (A + A.transpose());
        const Vector b = X.transpose() * vz;
        const LassoFit sub = lasso::solve(A, b, lambda, beta, options.inner);

        // Backtrack along the proximal Newton direction until the objective decreases.
        Vector candidate = sub.beta;
        double next = objective(X, y, w, family, candidate, lambda);
        double step = 1.0;
        const double slack = 1e-12 * std::max(1.0, std::abs(current));
        while (next > current + slack && step > 1e-10) {
            step *= 0.5;
            candidate = beta + step * (sub.beta - beta);
            next = objective(X, y, w, family, candidate, lambda);
        }
        if (next > current + slack) {
            out.converged = true;  // no descent direction left at this precision
            break;
        }

        const double change = (sub.beta - beta).cwiseAbs().maxCoeff();
        beta = candidate;
        current = next;
        if (beta.cwiseAbs().maxCoeff() > options.beta_cap) {
            beta = beta.cwiseMax(-options.beta_cap).cwiseMin(options.beta_cap);
            out.capped = true;
            break;
        }
        if (change < options.tol) {
            out.converged = true;
            break;
        }
    }
    out.beta = beta;
    out.active_set = lasso::support(beta);
    return out;
}

WeightedMoments replay_moments(const ObsBuffer& buffer) {
    WeightedMoments m(buffer.dim(), buffer.forgetting());
    const Matrix X = buffer.design();
    const Vector y = buffer.responses();
    for (Index i = 0; i < X.rows(); ++i) m.update(X.row(i).transpose(), y[i]);
    return m;
}

namespace {

LassoFit fit_buffer(const ObsBuffer& buffer, const Family& family, double lambda,
                    const Vector& start, const IrlsOptions& options) {
    if (buffer.empty()) throw std::invalid_argument("fit_penalized: empty observation buffer");
    if (family.kind() == FamilyKind::gaussian) {
        const WeightedMoments m = replay_moments(buffer);
        return lasso::solve(m.gram(), m.cross(), lambda, start, options.inner);
    }
    return fit(buffer.design(), buffer.responses(), buffer.weights(), family, lambda, start, options);
}

} // namespace

LassoFit fit_penalized(const ObsBuffer& buffer, const Family& family, double lambda,
                       const IrlsOptions& options) {
    return fit_buffer(buffer, family, lambda, Vector::Zero(buffer.dim()), options);
}

LassoFit fit_penalized(const ObsBuffer& buffer, const Family& family, double lambda,
                       const LassoFit& warm, const IrlsOptions& options) {
    const Vector start = warm.beta.size() == buffer.dim() ? warm.beta : Vector::Zero(buffer.dim());
    return fit_buffer(buffer, family, lambda, start, options);
}

} // namespace glm
} // namespace rap
