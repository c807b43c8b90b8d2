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
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace odnmr {

class RankDeficientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LmOptions {
    double abs_tol = 1e-10; // on the residual norm
    double rel_tol = 1e-8;  // on the scaled gradient and the relative step
    int max_iterations = 200;
    double lambda0 = 1e-3;
    double nu = 10.0;
    bool allow_rank_deficient = false;
};

struct LmResult {
    Eigen::VectorXd params;
    Eigen::VectorXd std_errors;
    Eigen::MatrixXd covariance;
    double residual_norm = 0.0;
    double gradient_measure = 0.0;
    bool converged = false;
    int n_iterations = 0;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

namespace lm_detail {

inline Eigen::VectorXd project(Eigen::VectorXd p, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    return p.cwiseMax(lo).cwiseMin(hi);
}

// Largest |cos| between the residual and a Jacobian column, skipping components
// pinned at a bound by a gradient that points outward.
inline double scaled_gradient(const Eigen::MatrixXd& J, const Eigen::VectorXd& r, const Eigen::VectorXd& p,
                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    const double rn = r.norm();
    if (rn == 0.0) return 0.0;
    const Eigen::VectorXd g = J.transpose() * r;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        if (p[j] <= lo[j] && g[j] > 0.0) continue;
        if (p[j] >= hi[j] && g[j] < 0.0) continue;
        const double cn = J.col(j).norm();
        if (cn == 0.0) continue;
        worst = std::max(worst, std::abs(g[j]) / (cn * rn));
    }
    return worst;
}

} // namespace lm_detail

// Levenberg-Marquardt with Marquardt's diagonal scaling and projection onto box bounds.
inline LmResult levenberg_marquardt(const ResidualFn& residual, const JacobianFn& jacobian, Eigen::VectorXd p,
                                    const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                    const LmOptions& opt = {})
{
    const Eigen::Index n = p.size();
    p = lm_detail::project(p, lower, upper);
    Eigen::VectorXd r = residual(p);
    if (r.size() < n) throw std::invalid_argument("fit: fewer data points than parameters");
    if (!r.allFinite()) throw std::invalid_argument("fit: residuals are not finite at the initial point");
    Eigen::MatrixXd J = jacobian(p);

    if (!opt.allow_rank_deficient) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (J.col(j).norm() == 0.0) {
                throw RankDeficientError("fit: Jacobian column " + std::to_string(j) + " vanishes at the start point");
            }
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
        qr.setThreshold(1e-13);
        if (qr.rank() < n) throw RankDeficientError("fit: singular Jacobian at the start point");
    }

    LmResult out;
    double cost = r.squaredNorm();
    const double r0 = std::sqrt(cost);
    double lambda = opt.lambda0;
    int it = 0;
    bool done = false;
    for (; it < opt.max_iterations && !done; ++it) {
        out.gradient_measure = lm_detail::scaled_gradient(J, r, p, lower, upper);
        if (out.gradient_measure <= opt.rel_tol || std::sqrt(cost) <= opt.abs_tol * (1.0 + r0)) {
            out.converged = true;
            break;
        }
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        Eigen::VectorXd d = A.diagonal().cwiseMax(1e-300);
        bool improved = false;
        while (!improved) {
            Eigen::MatrixXd M = A;
            M.diagonal() += lambda * d;
            const Eigen::VectorXd step = M.ldlt().solve(-g);
            const Eigen::VectorXd trial = lm_detail::project(p + step, lower, upper);
            const Eigen::VectorXd rt = residual(trial);
            const double ct = rt.allFinite() ? rt.squaredNorm() : std::numeric_limits<double>::infinity();
            if (ct < cost) {
                const double rel_step = (trial - p).norm() / (p.norm() + opt.rel_tol);
                const double rel_drop = (cost - ct) / std::max(cost, 1e-300);
                p = trial;
                r = rt;
                cost = ct;
                J = jacobian(p);
                lambda = std::max(lambda / opt.nu, 1e-15);
                improved = true;
                if (rel_step <= opt.rel_tol * 1e-2 && rel_drop <= opt.rel_tol * 1e-2) {
                    out.gradient_measure = lm_detail::scaled_gradient(J, r, p, lower, upper);
                    out.converged = out.gradient_measure <= std::sqrt(opt.rel_tol);
                    done = true;
                }
            } else {
                lambda *= opt.nu;
                if (lambda > 1e16) {
                    // No descent left at machine precision: this is the minimum if the gradient agrees.
                    out.gradient_measure = lm_detail::scaled_gradient(J, r, p, lower, upper);
                    out.converged = out.gradient_measure <= std::sqrt(opt.rel_tol);
                    done = true;
                    break;
                }
            }
        }
    }

    out.params = p;
    out.residual_norm = std::sqrt(cost);
    out.n_iterations = it;
    const Eigen::Index m = r.size();
    const double s2 = m > n ? cost / static_cast<double>(m - n) : 0.0;
    const Eigen::MatrixXd A = J.transpose() * J;
    out.covariance = s2 * A.completeOrthogonalDecomposition().pseudoInverse();
    out.std_errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    return out;
}

} // namespace odnmr
