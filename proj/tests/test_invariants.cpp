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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "odnmr/analysis/estimators.hpp"
#include "odnmr/analysis/fit.hpp"
#include "odnmr/dynamics/simulator.hpp"
#include "odnmr/sequence/dsl.hpp"

using namespace odnmr;

namespace {

constexpr int kCases = 1000;

using Rand = std::mt19937_64;

double uniform(Rand& r, double a, double b) { return std::uniform_real_distribution<double>(a, b)(r); }

IonClass random_ion(Rand& r)
{
    IonClass ion;
    double a = uniform(r, 0.0, 1.0), b = uniform(r, 0.0, 1.0), c = uniform(r, 0.0, 1.0);
    const double s = a + b + c;
    ion.populations = {a / s, b / s, c / s};
    ion.delta_spin_khz = uniform(r, -200.0, 200.0);
    ion.delta_opt_mhz = uniform(r, -1.0, 1.0);
    ion.weight = uniform(r, 0.1, 1.0);
    return ion;
}

PulseEvent random_event(Rand& r, const LevelScheme& lv)
{
    switch (std::uniform_int_distribution<int>(0, 3)(r)) {
    case 0:
        return RfPulse{uniform(r, 0.0, 1.0) < 0.5 ? lv.f12_mhz : lv.f23_mhz, uniform(r, 0.0, 100.0),
                       uniform(r, 0.0, 360.0), uniform(r, 0.1, 100.0)};
    case 1: return Wait{uniform(r, 0.0, 5e5)};
    case 2: {
        const double lo = uniform(r, -2.0, 1.0);
        const OpticalRole role = static_cast<OpticalRole>(std::uniform_int_distribution<int>(0, 2)(r));
        return OpticalPulse{lo, lo + uniform(r, 0.0, 2.0), uniform(r, 0.0, 100.0), uniform(r, 1.0, 1e5), role};
    }
    default: return ReadoutWindow{uniform(r, -1.0, 1.0), uniform(r, 1.0, 100.0)};
    }
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle)
{
    Eigen::Matrix3d k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

} // namespace

TEST(Invariants, PopulationsStayNormalised)
{
    Rand r(101);
    NoiseModel noise;
    noise.ou_sigma = 26447.2;
    const OpticalModel optics;
    const LevelScheme lv;
    for (int i = 0; i < kCases; ++i) {
        std::vector<IonClass> ions;
        for (int k = 0; k < 4; ++k) ions.push_back(random_ion(r));
        SimState s = make_state(ions, lv, noise);
        for (int k = 0; k < 6; ++k) {
            apply_event(s, random_event(r, lv), noise, optics, 1.48, i % 2 ? PulseModel::Hard : PulseModel::Exact);
        }
        for (const auto& ion : s.ensemble) {
            double sum = 0.0;
            for (double p : ion.populations) {
                ASSERT_GE(p, -1e-12) << "case " << i;
                ASSERT_LE(p, 1.0 + 1e-12) << "case " << i;
                sum += p;
            }
            ASSERT_NEAR(sum, 1.0, 1e-12) << "case " << i;
        }
    }
}

TEST(Invariants, PulsesPreserveBlochNorm)
{
    Rand r(202);
    const LevelScheme lv;
    for (int i = 0; i < kCases; ++i) {
        IonClass ion = random_ion(r);
        ion.pair = Transition::Low;
        Eigen::Vector3d b(uniform(r, -1, 1), uniform(r, -1, 1), uniform(r, -1, 1));
        ion.bloch = b.normalized() * uniform(r, 0.1, 1.0);
        const double norm = ion.bloch.norm();
        SimState s = make_state({ion}, lv, NoiseModel{});
        s.ensemble[0].bloch = ion.bloch;
        s.ensemble[0].pair = Transition::Low;
        for (int k = 0; k < 5; ++k) {
            apply_rf_pulse(s, RfPulse{lv.f12_mhz, uniform(r, 0.0, 100.0), uniform(r, 0.0, 360.0), uniform(r, 0.1, 200.0)},
                           1.48, NoiseModel{}, i % 2 ? PulseModel::Hard : PulseModel::Exact);
        }
        ASSERT_NEAR(s.ensemble[0].bloch.norm(), norm, 1e-12) << "case " << i;
        // Free evolution never grows the transverse part.
        const auto transverse = [&] { return std::hypot(s.ensemble[0].bloch.x(), s.ensemble[0].bloch.y()); };
        const double before = transverse();
        apply_wait(s, Wait{uniform(r, 0.0, 1e6)}, NoiseModel{});
        ASSERT_LE(transverse(), before + 1e-12) << "case " << i;
    }
}

TEST(Invariants, RotationsCompose)
{
    Rand r(303);
    const LevelScheme lv;
    for (int i = 0; i < kCases; ++i) {
        const double delta = uniform(r, -50.0, 50.0);
        const double power = uniform(r, 1.0, 100.0);
        const double phase = uniform(r, 0.0, 360.0);
        const double t1 = uniform(r, 0.1, 100.0), t2 = uniform(r, 0.1, 100.0);
        IonClass ion;
        ion.populations = {1.0, 0.0, 0.0};
        ion.bloch = BlochVector(0.0, 0.0, 1.0);
        ion.delta_spin_khz = delta;
        SimState split = make_state({ion}, lv, NoiseModel{});
        SimState whole = split;
        apply_rf_pulse(split, RfPulse{lv.f12_mhz, power, phase, t1}, 1.48);
        apply_rf_pulse(split, RfPulse{lv.f12_mhz, power, phase, t2}, 1.48);
        apply_rf_pulse(whole, RfPulse{lv.f12_mhz, power, phase, t1 + t2}, 1.48);
        ASSERT_LT((split.ensemble[0].bloch - whole.ensemble[0].bloch).norm(), 1e-10) << "case " << i;

        // Two resonant pulses with different phases against an explicit matrix product.
        const double p2 = uniform(r, 0.0, 360.0);
        ion.delta_spin_khz = 0.0;
        SimState res = make_state({ion}, lv, NoiseModel{});
        apply_rf_pulse(res, RfPulse{lv.f12_mhz, power, phase, t1}, 1.48);
        apply_rf_pulse(res, RfPulse{lv.f12_mhz, power, p2, t2}, 1.48);
        const double w = 2.0 * std::numbers::pi * 1.48 * std::sqrt(power) * 1e-3;
        const auto axis = [](double deg) {
            const double a = deg * std::numbers::pi / 180.0;
            return Eigen::Vector3d(std::cos(a), std::sin(a), 0.0);
        };
        const Eigen::Vector3d expect = rodrigues(axis(p2), w * t2) * rodrigues(axis(phase), w * t1) * Eigen::Vector3d(0, 0, 1);
        ASSERT_LT((res.ensemble[0].bloch - expect).norm(), 1e-10) << "case " << i;
    }
}

TEST(Invariants, SequenceTextRoundTrip)
{
    Rand r(404);
    const LevelScheme lv;
    for (int i = 0; i < kCases; ++i) {
        PulseSequence seq;
        const int n = std::uniform_int_distribution<int>(1, 8)(r);
        for (int k = 0; k < n; ++k) {
            PulseEvent e = random_event(r, lv);
            if (auto* p = std::get_if<RfPulse>(&e)) {
                p->frequency_mhz = uniform(r, 0.1, 100.0);
                p->phase_deg = normalize_phase_deg(p->phase_deg);
            }
            seq.events.push_back(e);
        }
        const std::string text = format_sequence(seq);
        const PulseSequence back = parse_sequence(text);
        ASSERT_EQ(back.events, seq.events) << text;
        ASSERT_EQ(format_sequence(back), text);
    }
}

TEST(Invariants, JacobiansMatchFiniteDifferences)
{
    Rand r(505);
    const std::vector<ModelKind> kinds{ModelKind::Lorentzian,         ModelKind::Gaussian,      ModelKind::Exponential,
                                       ModelKind::DoubleExponential,  ModelKind::StretchedExponential,
                                       ModelKind::SqrtPower,          ModelKind::PowerLawScaling, ModelKind::OuCpmg,
                                       ModelKind::DampedCosine};
    int checked = 0;
    for (int i = 0; i < kCases; ++i) {
        const FitModel m{kinds[static_cast<std::size_t>(i) % kinds.size()], 1 + i % 8};
        Eigen::VectorXd p(static_cast<Eigen::Index>(m.arity()));
        double x = 0.0;
        switch (m.kind) {
        case ModelKind::Lorentzian:
        case ModelKind::Gaussian:
            p << uniform(r, -1, 1), uniform(r, 0.05, 1), uniform(r, -2, 2), uniform(r, -1, 1);
            x = p[0] + uniform(r, -2, 2) * p[1];
            break;
        case ModelKind::Exponential:
            p << uniform(r, 0.1, 2), uniform(r, 0.1, 3);
            x = uniform(r, 0.0, 2.0);
            break;
        case ModelKind::DoubleExponential:
            p << uniform(r, 0.1, 1), uniform(r, 1, 10), uniform(r, 0.1, 1), uniform(r, 50, 200);
            x = uniform(r, 0.0, 100.0);
            break;
        case ModelKind::StretchedExponential:
            p << uniform(r, 0.1, 1), uniform(r, 0.1, 2), uniform(r, 0.5, 2);
            x = uniform(r, 0.05, 2.0);
            break;
        case ModelKind::SqrtPower:
            p << uniform(r, 0.5, 2);
            x = uniform(r, 1.0, 100.0);
            break;
        case ModelKind::PowerLawScaling:
            p << uniform(r, 0.1, 2), uniform(r, -1, 1);
            x = uniform(r, 1.0, 32.0);
            break;
        case ModelKind::OuCpmg:
            p << uniform(r, 1e3, 5e4), std::pow(10.0, uniform(r, -4, -1)), uniform(r, 0.5, 1.0);
            x = std::pow(10.0, uniform(r, -6, -3));
            break;
        case ModelKind::DampedCosine:
            p << uniform(r, 0.1, 1), uniform(r, 10, 300), uniform(r, 0.001, 0.05), uniform(r, -3, 3), uniform(r, -1, 1);
            x = uniform(r, 0.0, 300.0);
            break;
        }
        const Eigen::VectorXd g = m.gradient(x, p);
        for (Eigen::Index j = 0; j < p.size(); ++j) {
            const double h = 1e-6 * std::max(std::abs(p[j]), 1e-3);
            Eigen::VectorXd a = p, b = p;
            a[j] += h;
            b[j] -= h;
            const double fd = (m.value(x, a) - m.value(x, b)) / (2.0 * h);
            // Relative bound plus the rounding floor of the difference quotient.
            const double rounding = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(m.value(x, p)) / h;
            ASSERT_LE(std::abs(g[j] - fd), 1e-5 * std::max(std::abs(fd), std::abs(g[j])) + rounding)
                << m.name() << " param " << j << " x=" << x << " analytic=" << g[j] << " fd=" << fd;
        }
        ++checked;
    }
    EXPECT_EQ(checked, kCases);
}

TEST(Invariants, AnalysisSymmetries)
{
    Rand r(606);
    for (int i = 0; i < kCases; ++i) {
        const double a = uniform(r, 0.0, 1.0), b = uniform(r, 0.01, 1.0);
        const auto v = visibility({a, b}, {b, a});
        ASSERT_DOUBLE_EQ(v.values[0], -v.values[1]);

        std::vector<std::pair<double, double>> d;
        for (int n : {1, 2, 4, 8}) d.emplace_back(n, uniform(r, 0.1, 2.0));
        const auto s = fit_scaling(d);
        const double c = uniform(r, 0.1, 10.0);
        for (auto& [n, t] : d) t *= c;
        const auto sc = fit_scaling(d);
        ASSERT_NEAR(sc.beta, s.beta, 1e-12);
        ASSERT_NEAR(sc.t2_echo / s.t2_echo, c, 1e-12 * c);

        const double rr = uniform(r, 1e-10, 1e-8);
        const double mu1 = uniform(r, 1e-27, 1e-23), mu2 = uniform(r, 1e-27, 1e-23);
        ASSERT_NEAR(dipolar_coupling(mu1, mu2, rr) / dipolar_coupling(mu1, mu2, 2.0 * rr), 8.0, 1e-12);
    }
}
