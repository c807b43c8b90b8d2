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
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "odnmr/dynamics/ou.hpp"

namespace odnmr {

enum class ModelKind {
    Lorentzian,
    Gaussian,
    Exponential,
    DoubleExponential,
    StretchedExponential,
    SqrtPower,
    PowerLawScaling,
    OuCpmg,
    DampedCosine,
};

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();
inline constexpr double kTinyPositive = std::numeric_limits<double>::min();

// One fit model. Lineshapes use (center, fwhm, amplitude, offset); OuCpmg takes the
// pulse spacing tau in seconds as x and carries the pulse count as a constant.
struct FitModel {
    ModelKind kind = ModelKind::Exponential;
    int n_pulses = 1;

    std::string name() const
    {
        switch (kind) {
        case ModelKind::Lorentzian: return "Lorentzian";
        case ModelKind::Gaussian: return "Gaussian";
        case ModelKind::Exponential: return "Exponential";
        case ModelKind::DoubleExponential: return "DoubleExponential";
        case ModelKind::StretchedExponential: return "StretchedExponential";
        case ModelKind::SqrtPower: return "SqrtPower";
        case ModelKind::PowerLawScaling: return "PowerLawScaling";
        case ModelKind::OuCpmg: return "OuCpmg";
        case ModelKind::DampedCosine: return "DampedCosine";
        }
        return "?";
    }

    std::vector<std::string> param_names() const
    {
        switch (kind) {
        case ModelKind::Lorentzian:
        case ModelKind::Gaussian: return {"center", "fwhm", "amplitude", "offset"};
        case ModelKind::Exponential: return {"amplitude", "rate"};
        case ModelKind::DoubleExponential: return {"a", "t1", "b", "t2"};
        case ModelKind::StretchedExponential: return {"amplitude", "T", "beta"};
        case ModelKind::SqrtPower: return {"k"};
        case ModelKind::PowerLawScaling: return {"T", "beta"};
        case ModelKind::OuCpmg: return {"sigma", "tau_c", "amplitude"};
        case ModelKind::DampedCosine: return {"amplitude", "decay", "frequency", "phase", "offset"};
        }
        return {};
    }

    std::size_t arity() const { return param_names().size(); }

    Eigen::VectorXd lower() const
    {
        const double u = -kUnbounded;
        switch (kind) {
        case ModelKind::Lorentzian:
        case ModelKind::Gaussian: return vec({u, kTinyPositive, u, u});
        case ModelKind::Exponential: return vec({u, 0.0});
        case ModelKind::DoubleExponential: return vec({u, kTinyPositive, u, kTinyPositive});
        case ModelKind::StretchedExponential: return vec({u, kTinyPositive, kTinyPositive});
        case ModelKind::SqrtPower: return vec({u});
        case ModelKind::PowerLawScaling: return vec({kTinyPositive, u});
        case ModelKind::OuCpmg: return vec({0.0, kTinyPositive, u});
        case ModelKind::DampedCosine: return vec({u, kTinyPositive, u, u, u});
        }
        return {};
    }

    Eigen::VectorXd upper() const { return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(arity()), kUnbounded); }

    double value(double x, const Eigen::VectorXd& p) const
    {
        switch (kind) {
        case ModelKind::Lorentzian: {
            const double u = 2.0 * (x - p[0]) / p[1];
            return p[2] / (1.0 + u * u) + p[3];
        }
        case ModelKind::Gaussian: {
            const double u = (x - p[0]) / p[1];
            return p[2] * std::exp(-4.0 * std::numbers::ln2 * u * u) + p[3];
        }
        case ModelKind::Exponential: return p[0] * std::exp(-p[1] * x);
        case ModelKind::DoubleExponential: return p[0] * std::exp(-x / p[1]) + p[2] * std::exp(-x / p[3]);
        case ModelKind::StretchedExponential: return p[0] * std::exp(-std::pow(x / p[1], p[2]));
        case ModelKind::SqrtPower: return p[0] * std::sqrt(x);
        case ModelKind::PowerLawScaling: return p[0] * std::pow(x, p[1]);
        case ModelKind::OuCpmg: return p[2] * std::exp(-ou_cpmg_exponent(n_pulses, x, p[0], p[1]));
        case ModelKind::DampedCosine:
            return p[0] * std::exp(-x / p[1]) * std::cos(2.0 * std::numbers::pi * p[2] * x + p[3]) + p[4];
        }
        return 0.0;
    }

    // d value / d p at x.
    Eigen::VectorXd gradient(double x, const Eigen::VectorXd& p) const
    {
        Eigen::VectorXd g(static_cast<Eigen::Index>(arity()));
        switch (kind) {
        case ModelKind::Lorentzian: {
            const double u = 2.0 * (x - p[0]) / p[1];
            const double den = 1.0 + u * u;
            g << p[2] * 4.0 * u / (p[1] * den * den), p[2] * 2.0 * u * u / (p[1] * den * den), 1.0 / den, 1.0;
            break;
        }
        case ModelKind::Gaussian: {
            const double c = 4.0 * std::numbers::ln2;
            const double d = x - p[0];
            const double e = std::exp(-c * d * d / (p[1] * p[1]));
            g << p[2] * e * 2.0 * c * d / (p[1] * p[1]), p[2] * e * 2.0 * c * d * d / (p[1] * p[1] * p[1]), e, 1.0;
            break;
        }
        case ModelKind::Exponential: {
            const double e = std::exp(-p[1] * x);
            g << e, -p[0] * x * e;
            break;
        }
        case ModelKind::DoubleExponential: {
            const double e1 = std::exp(-x / p[1]);
            const double e2 = std::exp(-x / p[3]);
            g << e1, p[0] * e1 * x / (p[1] * p[1]), e2, p[2] * e2 * x / (p[3] * p[3]);
            break;
        }
        case ModelKind::StretchedExponential: {
            if (x <= 0.0) {
                g << (x == 0.0 ? 1.0 : std::exp(-std::pow(x / p[1], p[2]))), 0.0, 0.0;
                break;
            }
            const double z = std::pow(x / p[1], p[2]);
            const double e = std::exp(-z);
            g << e, p[0] * e * z * p[2] / p[1], -p[0] * e * z * std::log(x / p[1]);
            break;
        }
        case ModelKind::SqrtPower: g << std::sqrt(x); break;
        case ModelKind::PowerLawScaling: {
            const double xb = std::pow(x, p[1]);
            g << xb, x > 0.0 ? p[0] * xb * std::log(x) : 0.0;
            break;
        }
        case ModelKind::OuCpmg: {
            const double chi1 = ou_cpmg_exponent(n_pulses, x, 1.0, p[1]); // exponent at unit sigma
            const double e = std::exp(-chi1 * p[0] * p[0]);
            g << -p[2] * e * 2.0 * p[0] * chi1, -p[2] * e * p[0] * p[0] * ou_cpmg_exponent_dtau_c(n_pulses, x, 1.0, p[1]),
                e;
            break;
        }
        case ModelKind::DampedCosine: {
            const double w = 2.0 * std::numbers::pi;
            const double e = std::exp(-x / p[1]);
            const double th = w * p[2] * x + p[3];
            const double c = std::cos(th);
            const double s = std::sin(th);
            g << e * c, p[0] * e * c * x / (p[1] * p[1]), -p[0] * e * s * w * x, -p[0] * e * s, 1.0;
            break;
        }
        }
        return g;
    }

    // d chi / d tau_c of the closed-form CPMG exponent.
    static double ou_cpmg_exponent_dtau_c(int n, double tau, double sigma, double tau_c)
    {
        if (sigma == 0.0 || tau <= 0.0) return 0.0;
        const double t = n * tau;
        const double x = tau / (2.0 * tau_c);
        const double x2 = x * x;
        // b(x) - x b'(x) with b = 1 - tanh(x)/x
        double lin;
        if (x < 1e-2) {
            lin = x2 * (-1.0 / 3.0 + x2 * (6.0 / 15.0 + x2 * (-85.0 / 315.0 + x2 * 434.0 / 2835.0)));
        } else {
            const double th = std::tanh(x);
            const double sech = 1.0 / std::cosh(x);
            const double b = 1.0 - th / x;
            const double db = (th - x * sech * sech) / x2;
            lin = b - x * db;
        }
        const double sh = std::sinh(0.5 * x);
        const double q = 2.0 * sh * sh / std::cosh(x);
        const double dq = std::tanh(x) / std::cosh(x);
        const double parity = (n % 2 == 1) ? 1.0 : -1.0;
        const double E = std::exp(-t / tau_c);
        const double s2 = sigma * sigma;
        return s2 * (t * lin - 2.0 * tau_c * (1.0 + parity * E) * q * q - parity * E * t * q * q +
                     2.0 * tau_c * x * (1.0 + parity * E) * q * dq);
    }

private:
    static Eigen::VectorXd vec(std::initializer_list<double> v)
    {
        Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
        Eigen::Index i = 0;
        for (double d : v) out[i++] = d;
        return out;
    }
};

inline ModelKind model_kind_from_string(std::string_view name)
{
    for (ModelKind k : {ModelKind::Lorentzian, ModelKind::Gaussian, ModelKind::Exponential,
                        ModelKind::DoubleExponential, ModelKind::StretchedExponential, ModelKind::SqrtPower,
                        ModelKind::PowerLawScaling, ModelKind::OuCpmg, ModelKind::DampedCosine}) {
        if (FitModel{k}.name() == name) return k;
    }
    throw std::invalid_argument("unknown fit model '" + std::string(name) + "'");
}

} // namespace odnmr
