// Copyright 2026 The odnmr-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "odnmr/analysis/lm.hpp"
#include "odnmr/analysis/models.hpp"

namespace odnmr {

struct FitResult {
    FitModel model;
    std::vector<double> params;
    std::vector<double> std_errors;
    double residual_norm = 0.0;
    bool converged = false;
    int n_iterations = 0;
    std::size_t n_points = 0;
    std::string diagnostic;

    double param(std::string_view name) const
    {
        const auto names = model.param_names();
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return params[i];
        }
        throw std::out_of_range("fit result has no parameter '" + std::string(name) + "'");
    }

    double std_error(std::string_view name) const
    {
        const auto names = model.param_names();
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return std_errors[i];
        }
        throw std::out_of_range("fit result has no parameter '" + std::string(name) + "'");
    }
};

// Weighted least squares of `model` to (x, y). Samples with non-finite y are skipped
// (flagged visibilities); `weights` multiply squared residuals.
inline FitResult fit(const FitModel& model, const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& weights, const std::vector<double>& init, const LmOptions& opt = {})
{
    if (x.size() != y.size()) throw std::invalid_argument("fit: x and y differ in length");
    if (!weights.empty() && weights.size() != x.size()) throw std::invalid_argument("fit: weights differ in length");
    const std::size_t n = model.arity();
    if (init.size() != n) throw std::invalid_argument("fit: " + model.name() + " takes " + std::to_string(n) + " parameters");

    std::vector<double> xs, ys, sw;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(y[i]) || !std::isfinite(x[i])) continue;
        const double w = weights.empty() ? 1.0 : weights[i];
        if (!(w >= 0.0)) throw std::invalid_argument("fit: weights must be >= 0");
        xs.push_back(x[i]);
        ys.push_back(y[i]);
        sw.push_back(std::sqrt(w));
    }
    if (xs.size() < n) throw std::invalid_argument("fit: need at least as many points as parameters");

    const Eigen::VectorXd lo = model.lower();
    const Eigen::VectorXd hi = model.upper();
    Eigen::VectorXd p0 = Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        if (!(p0[j] >= lo[j] && p0[j] <= hi[j])) {
            throw std::invalid_argument("fit: initial " + model.param_names()[j] + " outside its bounds");
        }
    }

    const auto m = static_cast<Eigen::Index>(xs.size());
    auto residual = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(m);
        for (Eigen::Index i = 0; i < m; ++i) r[i] = sw[i] * (model.value(xs[i], p) - ys[i]);
        return r;
    };
    auto jacobian = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd J(m, static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < m; ++i) J.row(i) = sw[i] * model.gradient(xs[i], p).transpose();
        return J;
    };
    const LmResult lm = levenberg_marquardt(residual, jacobian, p0, lo, hi, opt);

    FitResult out;
    out.model = model;
    out.params.assign(lm.params.data(), lm.params.data() + n);
    out.std_errors.assign(lm.std_errors.data(), lm.std_errors.data() + n);
    out.residual_norm = lm.residual_norm;
    out.converged = lm.converged;
    out.n_iterations = lm.n_iterations;
    out.n_points = xs.size();
    if (!lm.converged) out.diagnostic = "no convergence after " + std::to_string(lm.n_iterations) + " iterations";
    return out;
}

inline FitResult fit(const FitModel& model, const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& init, const LmOptions& opt = {})
{
    return fit(model, x, y, {}, init, opt);
}

namespace fit_detail {

inline std::vector<std::pair<double, double>> finite_pairs(const std::vector<double>& x, const std::vector<double>& y)
{
    std::vector<std::pair<double, double>> v;
    for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
        if (std::isfinite(x[i]) && std::isfinite(y[i])) v.emplace_back(x[i], y[i]);
    }
    std::sort(v.begin(), v.end());
    return v;
}

inline double median(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
}

// Ordinary least squares y = a + b x; returns {a, b, se_a, se_b}.
inline std::array<double, 4> ols(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double b = sxy / sxx;
    const double a = my - b * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - a - b * x[i];
        ss += r * r;
    }
    const double s2 = x.size() > 2 ? ss / (n - 2.0) : 0.0;
    const double se_b = std::sqrt(s2 / sxx);
    const double se_a = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    return {a, b, se_a, se_b};
}

// First x at which y falls below level, linearly interpolated; nullopt if never.
inline std::optional<double> first_crossing(const std::vector<std::pair<double, double>>& xy, double level)
{
    for (std::size_t i = 1; i < xy.size(); ++i) {
        const auto [x0, y0] = xy[i - 1];
        const auto [x1, y1] = xy[i];
        if (y0 >= level && y1 < level) return x0 + (level - y0) * (x1 - x0) / (y1 - y0);
    }
    return std::nullopt;
}

} // namespace fit_detail

// Data-driven start point for `model`.
inline std::vector<double> initial_guess(const FitModel& model, const std::vector<double>& x,
                                         const std::vector<double>& y)
{
    const auto xy = fit_detail::finite_pairs(x, y);
    if (xy.empty()) throw std::invalid_argument("initial_guess: no finite data");
    std::vector<double> xs, ys;
    for (const auto& [a, b] : xy) {
        xs.push_back(a);
        ys.push_back(b);
    }
    const double span = std::max(xs.back() - xs.front(), 1e-300);
    const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());

    switch (model.kind) {
    case ModelKind::Lorentzian:
    case ModelKind::Gaussian: {
        const double med = fit_detail::median(ys);
        const bool peak = (*ymax_it - med) >= (med - *ymin_it);
        const auto ext = peak ? ymax_it : ymin_it;
        const std::size_t k = static_cast<std::size_t>(ext - ys.begin());
        const double edge = 0.5 * (ys.front() + ys.back());
        const double amp = *ext - edge;
        const double half = edge + 0.5 * amp;
        std::size_t lo = k, hi = k;
        while (lo > 0 && (peak ? ys[lo - 1] >= half : ys[lo - 1] <= half)) --lo;
        while (hi + 1 < ys.size() && (peak ? ys[hi + 1] >= half : ys[hi + 1] <= half)) ++hi;
        double width = xs[hi] - xs[lo];
        if (xs.size() > 1) width = std::max(width, span / static_cast<double>(xs.size() - 1));
        if (!(width > 0.0)) width = span > 0.0 ? span / 4.0 : 1.0;
        return {xs[k], width, amp, edge};
    }
    case ModelKind::Exponential: {
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (ys[i] > 0.0) {
                lx.push_back(xs[i]);
                ly.push_back(std::log(ys[i]));
            }
        }
        if (lx.size() >= 2 && lx.front() != lx.back()) {
            const auto c = fit_detail::ols(lx, ly);
            return {std::exp(c[0]), std::max(-c[1], 0.0)};
        }
        return {ys.front(), 1.0 / span};
    }
    case ModelKind::DoubleExponential: {
        const double a0 = ys.front();
        return {0.5 * a0, span / 20.0, 0.5 * a0, span};
    }
    case ModelKind::StretchedExponential: {
        const double a = std::abs(ys.front()) > 0.0 ? ys.front() : *ymax_it;
        const auto t = fit_detail::first_crossing(xy, a / std::numbers::e);
        return {a, t.value_or(xs.back()), 1.0};
    }
    case ModelKind::SqrtPower: {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            num += ys[i] * std::sqrt(std::max(xs[i], 0.0));
            den += std::max(xs[i], 0.0);
        }
        return {den > 0.0 ? num / den : 1.0};
    }
    case ModelKind::PowerLawScaling: {
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (xs[i] > 0.0 && ys[i] > 0.0) {
                lx.push_back(std::log(xs[i]));
                ly.push_back(std::log(ys[i]));
            }
        }
        if (lx.size() >= 2) {
            const auto c = fit_detail::ols(lx, ly);
            return {std::exp(c[0]), c[1]};
        }
        return {ys.front(), 0.0};
    }
    case ModelKind::OuCpmg: {
        double best = std::numeric_limits<double>::infinity();
        std::vector<double> guess{0.0, 1.0, 1.0};
        const double tmin = std::max(xs.front(), 1e-300);
        for (int k = -40; k <= 40; ++k) {
            const double tc = tmin * std::pow(10.0, 0.125 * k + 1.0);
            double fy = 0.0, ff = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (ys[i] <= 0.0) continue;
                const double f = ou_cpmg_exponent(model.n_pulses, xs[i], 1.0, tc);
                fy += f * -std::log(std::min(ys[i], 1.0));
                ff += f * f;
            }
            if (!(ff > 0.0)) continue;
            const double s2 = std::max(fy / ff, 0.0);
            double cost = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const double r = std::exp(-s2 * ou_cpmg_exponent(model.n_pulses, xs[i], 1.0, tc)) - ys[i];
                cost += r * r;
            }
            if (cost < best) {
                best = cost;
                guess = {std::sqrt(s2), tc, 1.0};
            }
        }
        if (guess[0] == 0.0) guess[0] = 1.0 / tmin;
        return guess;
    }
    case ModelKind::DampedCosine: {
        double c = 0.0;
        for (double v : ys) c += v;
        c /= static_cast<double>(ys.size());
        // Periodogram peak over the resolvable band.
        const double df = 0.25 / span;
        const double fmax = 0.5 * static_cast<double>(xs.size() - 1) / span;
        double best_f = df, best_p = -1.0;
        std::complex<double> best_z;
        for (double f = df; f <= fmax; f += df) {
            std::complex<double> z = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                z += (ys[i] - c) * std::polar(1.0, -2.0 * std::numbers::pi * f * xs[i]);
            }
            if (std::norm(z) > best_p) {
                best_p = std::norm(z);
                best_f = f;
                best_z = z;
            }
        }
        // Envelope: peak deviation in the first quarter against the mean periodogram amplitude.
        double amp = 0.0;
        for (std::size_t i = 0; i < xs.size() && xs[i] <= xs.front() + 0.25 * span; ++i) {
            amp = std::max(amp, std::abs(ys[i] - c));
        }
        const double target = 2.0 * std::abs(best_z) / static_cast<double>(xs.size());
        double decay = 10.0 * span;
        if (amp > 0.0 && target < amp) {
            auto mean_env = [&](double T) {
                double s = 0.0;
                for (double xv : xs) s += std::exp(-(xv - xs.front()) / T);
                return s / static_cast<double>(xs.size());
            };
            double lo = 1e-3 * span, hi = 10.0 * span;
            for (int k = 0; k < 100; ++k) {
                const double mid = std::sqrt(lo * hi);
                (mean_env(mid) * amp < target ? lo : hi) = mid;
            }
            decay = std::sqrt(lo * hi);
        }
        const double a0 = amp * std::exp(xs.front() / decay);
        return {a0 > 0.0 ? a0 : 1.0, decay, best_f, std::arg(best_z), c};
    }
    }
    return {};
}

inline FitResult fit_auto(const FitModel& model, const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& weights = {}, const LmOptions& opt = {})
{
    return fit(model, x, y, weights, initial_guess(model, x, y), opt);
}

struct VisibilityResult {
    std::vector<double> values; // NaN where flagged
    std::vector<std::size_t> flagged;
};

// (s+ - s-) / (s+ + s-); a zero or non-finite denominator flags the sample.
inline VisibilityResult visibility(const std::vector<double>& s_plus, const std::vector<double>& s_minus)
{
    if (s_plus.size() != s_minus.size()) throw std::invalid_argument("visibility: inputs differ in length");
    VisibilityResult out;
    out.values.resize(s_plus.size());
    for (std::size_t i = 0; i < s_plus.size(); ++i) {
        const double den = s_plus[i] + s_minus[i];
        if (den == 0.0 || !std::isfinite(den)) {
            out.values[i] = std::numeric_limits<double>::quiet_NaN();
            out.flagged.push_back(i);
        } else {
            out.values[i] = (s_plus[i] - s_minus[i]) / den;
        }
    }
    return out;
}

struct ScalingFit {
    double beta = 0.0;
    double t2_echo = 0.0;
    double beta_std_error = 0.0;
    double t2_echo_std_error = 0.0;
};

// ln T2 = ln T2_echo + beta ln N by ordinary least squares.
inline ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& t2_by_n)
{
    std::vector<double> lx, ly;
    std::set<double> distinct;
    for (const auto& [n, t2] : t2_by_n) {
        if (!(n >= 1.0)) throw std::invalid_argument("fit_scaling: N must be >= 1");
        if (!(t2 > 0.0)) throw std::invalid_argument("fit_scaling: T2 must be > 0");
        lx.push_back(std::log(n));
        ly.push_back(std::log(t2));
        distinct.insert(n);
    }
    if (distinct.size() < 2) throw std::invalid_argument("fit_scaling: need at least 2 distinct N");
    const auto c = fit_detail::ols(lx, ly);
    ScalingFit out;
    out.beta = c[1];
    out.t2_echo = std::exp(c[0]);
    out.beta_std_error = c[3];
    out.t2_echo_std_error = out.t2_echo * c[2];
    return out;
}

// Total-time 1/e point of a decaying curve, relative to `amplitude`.
inline std::optional<double> one_over_e_time(const std::vector<double>& t, const std::vector<double>& v,
                                             double amplitude = 1.0)
{
    return fit_detail::first_crossing(fit_detail::finite_pairs(t, v), amplitude / std::numbers::e);
}

struct CpmgCurve {
    int n = 1;
    std::vector<double> tau_s;
    std::vector<double> visibility;
};

struct OuBathFit {
    double sigma = 0.0;  // rad/s
    double tau_c = 0.0;  // s
    std::vector<double> amplitudes;
    double sigma_std_error = 0.0;
    double tau_c_std_error = 0.0;
    double residual_norm = 0.0;
    bool converged = false;
    int n_iterations = 0;
    std::string diagnostic;
};

// Joint fit of the closed-form CPMG decay to every curve: shared (sigma, tau_c) and
// one amplitude per curve.
inline OuBathFit fit_ou_bath(const std::vector<CpmgCurve>& curves, const LmOptions& opt_in = {})
{
    if (curves.empty()) throw std::invalid_argument("fit_ou_bath: no curves");
    struct Pt {
        std::size_t curve;
        int n;
        double tau;
        double v;
    };
    std::vector<Pt> pts;
    std::vector<double> all_tau, all_v;
    for (std::size_t c = 0; c < curves.size(); ++c) {
        const auto& cv = curves[c];
        if (cv.n < 1) throw std::invalid_argument("fit_ou_bath: N must be >= 1");
        if (cv.tau_s.size() != cv.visibility.size()) throw std::invalid_argument("fit_ou_bath: curve lengths differ");
        for (std::size_t i = 0; i < cv.tau_s.size(); ++i) {
            if (!std::isfinite(cv.visibility[i])) continue;
            if (cv.visibility[i] < -1.0 - 1e-9 || cv.visibility[i] > 1.0 + 1e-9) {
                throw std::invalid_argument("fit_ou_bath: visibility outside [-1, 1]");
            }
            if (!(cv.tau_s[i] > 0.0)) throw std::invalid_argument("fit_ou_bath: tau must be > 0");
            pts.push_back({c, cv.n, cv.tau_s[i], cv.visibility[i]});
        }
    }
    const std::size_t nc = curves.size();
    const auto np = static_cast<Eigen::Index>(2 + nc);
    if (pts.size() < static_cast<std::size_t>(np)) throw std::invalid_argument("fit_ou_bath: too few points");

    // Start: best (sigma, tau_c) of a grid over the pooled curves at unit amplitude.
    double best = std::numeric_limits<double>::infinity();
    double s0 = 0.0, tc0 = 1.0;
    double tmin = std::numeric_limits<double>::infinity(), tmax = 0.0;
    for (const auto& p : pts) {
        tmin = std::min(tmin, p.tau);
        tmax = std::max(tmax, p.tau);
    }
    for (int k = -32; k <= 48; ++k) {
        const double tc = tmin * std::pow(10.0, 0.125 * k);
        double fy = 0.0, ff = 0.0;
        for (const auto& p : pts) {
            if (p.v <= 0.0) continue;
            const double f = ou_cpmg_exponent(p.n, p.tau, 1.0, tc);
            fy += f * -std::log(std::min(p.v, 1.0));
            ff += f * f;
        }
        if (!(ff > 0.0)) continue;
        const double s2 = std::max(fy / ff, 0.0);
        double cost = 0.0;
        for (const auto& p : pts) {
            const double r = std::exp(-s2 * ou_cpmg_exponent(p.n, p.tau, 1.0, tc)) - p.v;
            cost += r * r;
        }
        if (cost < best) {
            best = cost;
            s0 = std::sqrt(s2);
            tc0 = tc;
        }
    }

    const auto m = static_cast<Eigen::Index>(pts.size());
    auto residual = [&](const Eigen::VectorXd& q) {
        Eigen::VectorXd r(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& p = pts[static_cast<std::size_t>(i)];
            r[i] = q[2 + static_cast<Eigen::Index>(p.curve)] * std::exp(-ou_cpmg_exponent(p.n, p.tau, q[0], q[1])) - p.v;
        }
        return r;
    };
    auto jacobian = [&](const Eigen::VectorXd& q) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, np);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& p = pts[static_cast<std::size_t>(i)];
            const FitModel fm{ModelKind::OuCpmg, p.n};
            Eigen::Vector3d local(q[0], q[1], q[2 + static_cast<Eigen::Index>(p.curve)]);
            const Eigen::VectorXd g = fm.gradient(p.tau, local);
            J(i, 0) = g[0];
            J(i, 1) = g[1];
            J(i, 2 + static_cast<Eigen::Index>(p.curve)) = g[2];
        }
        return J;
    };
    Eigen::VectorXd q0(np);
    q0[0] = s0;
    q0[1] = tc0;
    for (std::size_t c = 0; c < nc; ++c) q0[2 + static_cast<Eigen::Index>(c)] = 1.0;
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(np, -kUnbounded);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(np, kUnbounded);
    lo[0] = 0.0;
    lo[1] = kTinyPositive;

    LmOptions opt = opt_in;
    opt.allow_rank_deficient = true;
    const LmResult lm = levenberg_marquardt(residual, jacobian, q0, lo, hi, opt);

    OuBathFit out;
    out.sigma = lm.params[0];
    out.tau_c = lm.params[1];
    for (std::size_t c = 0; c < nc; ++c) out.amplitudes.push_back(lm.params[2 + static_cast<Eigen::Index>(c)]);
    out.sigma_std_error = lm.std_errors[0];
    out.tau_c_std_error = lm.std_errors[1];
    out.residual_norm = lm.residual_norm;
    out.n_iterations = lm.n_iterations;
    out.converged = lm.converged;
    if (!lm.converged) out.diagnostic = "no convergence after " + std::to_string(lm.n_iterations) + " iterations";

    // Separate identification of sigma and tau_c needs tau on both sides of ~tau_c.
    const double x_lo = tmin / (2.0 * out.tau_c);
    const double x_hi = tmax / (2.0 * out.tau_c);
    if (out.sigma == 0.0 || out.sigma * out.tau_c < 1e-12) {
        out.converged = false;
        out.diagnostic = "sigma fitted to zero: tau_c is not identifiable";
    } else if (x_hi < 0.05) {
        out.converged = false;
        out.diagnostic = "all tau << tau_c: only sigma^2 / tau_c is identifiable";
    } else if (x_lo > 20.0) {
        out.converged = false;
        out.diagnostic = "all tau >> tau_c: only sigma^2 tau_c is identifiable";
    } else if (lm.covariance.size() > 0) {
        const double c01 = lm.covariance(0, 1);
        const double den = std::sqrt(lm.covariance(0, 0) * lm.covariance(1, 1));
        if (den > 0.0 && std::abs(c01 / den) > 0.9999) {
            out.converged = false;
            out.diagnostic = "sigma and tau_c are fully correlated over this tau range";
        }
    }
    return out;
}

} // namespace odnmr
