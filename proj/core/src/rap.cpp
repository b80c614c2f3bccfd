#include "rap/rap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace rap {

GradientMode parse_mode(std::string_view name) {
    if (name == "exact") return GradientMode::exact;
    if (name == "approx" || name == "approximate") return GradientMode::approximate;
    throw std::invalid_argument("unknown gradient mode '" + std::string(name) +
                                "' (expected exact or approx)");
}

std::string_view mode_name(GradientMode mode) {
    return mode == GradientMode::exact ? "exact" : "approx";
}

Vector dbeta_dlambda(const Matrix& curvature, const LassoFit& fit, GradientMode mode,
                     double jitter) {
    const Index p = fit.beta.size();
    if (curvature.rows() != p || curvature.cols() != p) {
        throw std::invalid_argument("dbeta_dlambda: curvature does not match coefficient length");
    }
    Vector out = Vector::Zero(p);
    const auto& active = fit.active_set;
    if (active.empty()) return out;

    if (mode == GradientMode::approximate) {
        for (Index j : active) {
            const double s = fit.beta[j] > 0.0 ? 1.0 : -1.0;
            out[j] = -s / curvature(j, j);
        }
        return out;
    }

    const auto k = static_cast<Index>(active.size());
    Matrix block(k, k);
    Vector sign(k);
    for (Index a = 0; a < k; ++a) {
        sign[a] = fit.beta[active[a]] > 0.0 ? 1.0 : -1.0;
        for (Index c = 0; c < k; ++c) block(a, c) = curvature(active[a], active[c]);
    }
    const double delta = jitter * block.diagonal().mean();
    block.diagonal().array() += delta;
    Eigen::LDLT<Matrix> ldlt(block);
    const Vector d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-12 * d.cwiseAbs().maxCoeff())) {
        std::ostringstream msg;
        msg << "dbeta_dlambda: active block is singular at coordinates {";
        for (Index a = 0; a < k; ++a) msg << (a ? ", " : "") << active[a];
        msg << "}";
        throw std::runtime_error(msg.str());
    }
    const Vector solved = ldlt.solve(sign);
    for (Index a = 0; a < k; ++a) out[active[a]] = -solved[a];
    return out;
}

Vector dbeta_dlambda(const WeightedMoments& m, const LassoFit& fit, GradientMode mode,
                     double jitter) {
    return dbeta_dlambda(m.gram(), fit, mode, jitter);
}

double dcost_dlambda(const Family& family, const Eigen::Ref<const Vector>& x_new, double y_new,
                     const LassoFit& fit, const Vector& dbeta) {
    if (x_new.size() != fit.beta.size() || dbeta.size() != fit.beta.size()) {
        throw std::invalid_argument("dcost_dlambda: dimension mismatch");
    }
    return family.nll_grad_beta(x_new, y_new, fit.beta).dot(dbeta);
}

FallbackDirection fallback_direction(const Vector& score, const Matrix& curvature) {
    FallbackDirection out{std::nullopt, Vector::Zero(score.size())};
    Index best = 0;
    double best_abs = 0.0;
    for (Index j = 0; j < score.size(); ++j) {
        if (std::abs(score[j]) > best_abs) {
            best_abs = std::abs(score[j]);
            best = j;
        }
    }
    if (best_abs == 0.0 || !(curvature(best, best) > 0.0)) return out;
    out.index = best;
    out.direction[best] = -(score[best] > 0.0 ? 1.0 : -1.0) / curvature(best, best);
    return out;
}

FallbackDirection fallback_direction(const WeightedMoments& m) {
    if (m.count() == 0) throw std::invalid_argument("fallback_direction: empty stream");
    return fallback_direction(m.cross(), m.gram());
}

RapState update_lambda(RapState state, double grad, double lam_max) {
    if (!std::isfinite(grad)) throw std::domain_error("update_lambda: non-finite gradient");
    if (!(state.epsilon >= 0.0)) {
        throw std::invalid_argument("update_lambda: step size must be >= 0");
    }
    if (!(lam_max >= 0.0)) throw std::invalid_argument("update_lambda: lam_max must be >= 0");
    state.lambda = std::clamp(state.lambda - state.epsilon * grad, 0.0, lam_max);
    return state;
}

RapLearner::RapLearner(Index p, Family family, RapOptions options)
    : family_(family), options_(options), moments_(p, options.forgetting) {
    if (!(options.epsilon >= 0.0) || !std::isfinite(options.epsilon)) {
        throw std::invalid_argument("RapLearner: epsilon must be finite and >= 0");
    }
    if (!(options.lambda0 >= 0.0) || !std::isfinite(options.lambda0)) {
        throw std::invalid_argument("RapLearner: lambda0 must be finite and >= 0");
    }
    if (!(options.jitter >= 0.0)) throw std::invalid_argument("RapLearner: jitter must be >= 0");
    state_ = RapState{options.lambda0, options.epsilon, options.mode, options.jitter};
    if (family_.kind() == FamilyKind::binomial) {
        buffer_.emplace(p, options.forgetting, options.buffer_min_weight);
    }
    fit_.beta = Vector::Zero(p);
    fit_.lambda = options.lambda0;
    fit_.converged = true;
}

double RapLearner::penalty_scale() const {
    if (!options_.normalize_penalty || count() == 0) return 1.0;
    if (buffer_) return buffer_->weights().sum();
    return moments_.omega();
}

Vector RapLearner::score_at_zero() const {
    if (buffer_) {
        return glm::score(buffer_->design(), buffer_->responses(), buffer_->weights(), family_,
                          Vector::Zero(dim()));
    }
    return moments_.cross();
}

Matrix RapLearner::curvature(const Vector& beta) const {
    if (buffer_) return glm::curvature(buffer_->design(), buffer_->weights(), family_, beta);
    return moments_.gram();
}

double RapLearner::lambda_max() const {
    if (count() == 0) throw std::logic_error("RapLearner::lambda_max: no observations yet");
    return lasso::lambda_max(score_at_zero()) / penalty_scale();
}

LassoFit RapLearner::solve_at(double lambda, const Vector& start) const {
    const double raw = lambda * penalty_scale();
    LassoFit out;
    if (buffer_) {
        out = glm::fit(buffer_->design(), buffer_->responses(), buffer_->weights(), family_, raw,
                       start, options_.irls);
    } else {
        out = lasso::solve(moments_.gram(), moments_.cross(), raw, start, options_.cd);
    }
    out.lambda = lambda;
    return out;
}

LassoFit RapLearner::refit(double lambda) const {
    if (count() == 0) {
        LassoFit empty = fit_;
        empty.lambda = lambda;
        return empty;
    }
    return solve_at(lambda, fit_.beta);
}

double RapLearner::gradient_for(const LassoFit& fit, const Eigen::Ref<const Vector>& x, double y,
                                bool* used_fallback) const {
    const double scale = penalty_scale();
    Vector direction;
    if (!fit.active_set.empty()) {
        direction = dbeta_dlambda(curvature(fit.beta), fit, state_.mode, state_.jitter);
        if (used_fallback) *used_fallback = false;
    } else {
        direction = fallback_direction(score_at_zero(), curvature(Vector::Zero(dim()))).direction;
        if (used_fallback) *used_fallback = true;
    }
    // d beta / d lambda_raw -> d beta / d lambda for lambda_raw = scale * lambda.
    direction *= scale;
    return dcost_dlambda(family_, x, y, fit, direction);
}

double RapLearner::lookahead_gradient(double lambda, const Eigen::Ref<const Vector>& x, double y,
                                      bool* used_fallback) const {
    if (count() == 0) throw std::logic_error("lookahead_gradient: no observations yet");
    return gradient_for(refit(lambda), x, y, used_fallback);
}

double RapLearner::map(double lambda, const Eigen::Ref<const Vector>& x, double y,
                       double epsilon) const {
    RapState s = state_;
    s.lambda = lambda;
    s.epsilon = epsilon;
    return update_lambda(s, lookahead_gradient(lambda, x, y), lambda_max()).lambda;
}

void RapLearner::set_lambda(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("RapLearner::set_lambda: lambda must be finite and >= 0");
    }
    state_.lambda = lambda;
}

TraceRecord RapLearner::step(const Eigen::Ref<const Vector>& x, double y) {
    if (x.size() != dim()) {
        throw std::invalid_argument("RapLearner::step: expected " + std::to_string(dim()) +
                                    " predictors, got " + std::to_string(x.size()));
    }
    if (!x.allFinite()) throw DataError("RapLearner::step: non-finite predictor");
    family_.validate_response(y);

    TraceRecord rec;
    rec.t = count() + 1;
    rec.lookahead_loss = family_.nll(x, y, fit_.beta);

    if (count() > 0 && count() >= options_.warmup && state_.epsilon > 0.0) {
        bool fallback = false;
        const double grad = gradient_for(fit_, x, y, &fallback);
        rec.used_fallback = fallback;
        state_ = update_lambda(state_, grad, lambda_max());
    }

    moments_.update(x, y);
    if (buffer_) buffer_->push(x, y);

    fit_ = solve_at(state_.lambda, fit_.beta);
    rec.refit_failed = !fit_.converged || fit_.capped;
    rec.lambda = state_.lambda;
    rec.active_size = fit_.active_set.size();
    return rec;
}

} // namespace rap
