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
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "odnmr/analysis/fit.hpp"
#include "odnmr/analysis/estimators.hpp"
#include "odnmr/analysis/report.hpp"
#include "odnmr/core/ensemble.hpp"
#include "odnmr/core/parallel.hpp"
#include "odnmr/core/random.hpp"
#include "odnmr/dynamics/simulator.hpp"
#include "odnmr/experiments/calibrate.hpp"
#include "odnmr/experiments/spec.hpp"
#include "odnmr/experiments/table.hpp"
#include "odnmr/sequence/builders.hpp"

namespace odnmr {

struct RunOptions {
    std::size_t jobs = 1;
    PulseModel pulse_model = PulseModel::Exact;
};

struct ExperimentResult {
    ExperimentKind kind = ExperimentKind::Rabi;
    RawTable raw;
    std::vector<FitResult> fits;
    nlohmann::json summary = nlohmann::json::object();
};

namespace exp_detail {

inline std::vector<double> linspace(double a, double b, std::size_t n)
{
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

inline std::vector<double> logspace(double a, double b, std::size_t n)
{
    auto v = linspace(std::log(a), std::log(b), n);
    for (double& x : v) x = std::exp(x);
    return v;
}

inline constexpr std::uint64_t kPointTag = 0x706f696e74ULL;
inline constexpr std::uint64_t kRepTag = 0x726570ULL;

struct Context {
    const ExperimentSpec& spec;
    nlohmann::json p;
    EnsembleConfig cfg;
    NoiseModel noise;
    OpticalModel optics;
    double k_rabi;
    RunOptions opts;

    double num(const char* key) const { return p.at(key).get<double>(); }
    std::size_t count(const char* key) const { return static_cast<std::size_t>(p.at(key).get<long long>()); }
    std::size_t reps() const { return count("repetitions"); }
    std::uint64_t point_seed(std::size_t i) const { return derive_seed(spec.seed, {kPointTag, i}); }

    EnsembleConfig windowed(double center_mhz, bool force = false) const
    {
        EnsembleConfig c = cfg;
        const double w = num("window_mhz");
        if (force || !c.optical_window) c.optical_window = OpticalWindow{center_mhz - w, center_mhz + w};
        return c;
    }

    SimState base_state(const EnsembleConfig& c) const { return make_state(sample_ensemble(c), c.levels, noise); }

    // Probe samples of `seq` started from `base`.
    std::vector<double> probes(const PulseSequence& seq, const SimState& base, std::uint64_t seed) const
    {
        SimOptions so;
        so.pulse_model = opts.pulse_model;
        so.noise_seed = seed;
        const auto res = simulate_from(seq, base, noise, optics, k_rabi, seed, so);
        std::vector<double> out;
        for (const auto& s : res.samples) out.push_back(s.signal);
        return out;
    }

    // Centre probe over reference probe.
    double spin_ratio(const PulseSequence& seq, const SimState& base, std::uint64_t seed) const
    {
        const auto s = probes(seq, base, seed);
        if (s.size() < 2 || s[0] == 0.0) throw SimulationError("spin readout: reference probe returned no signal");
        return s[1] / s[0];
    }

    // Noisy repetitions of the clean raw values of point i, mapped to table rows.
    std::vector<std::vector<double>> repetitions(std::size_t i, const std::vector<double>& clean,
                                                 const std::function<std::vector<double>(const std::vector<double>&)>& row) const
    {
        const double sd = num("readout_noise");
        std::vector<std::vector<double>> out;
        for (std::size_t r = 0; r < reps(); ++r) {
            std::vector<double> v = clean;
            if (sd > 0.0) {
                Rng rng(derive_seed(spec.seed, {kRepTag, i, r}));
                std::normal_distribution<double> gauss(0.0, 1.0);
                for (double& x : v) x *= 1.0 + sd * gauss(rng);
            }
            out.push_back(row(v));
        }
        return out;
    }
};

// Evaluates fn(i) for every sweep point in parallel; failures name the point.
template <typename Fn>
std::vector<std::vector<double>> evaluate(const Context& c, const std::vector<double>& sweep, const char* name, Fn&& fn)
{
    std::vector<std::vector<double>> clean(sweep.size());
    parallel_for(sweep.size(), c.opts.jobs, [&](std::size_t i) {
        try {
            clean[i] = fn(i);
        } catch (const std::exception& e) {
            throw SimulationError(to_string(c.spec.kind) + ": sweep point " + std::to_string(i) + " (" + name + " = " +
                                  format_number(sweep[i]) + ") failed: " + e.what());
        }
    });
    return clean;
}

inline std::vector<double> identity_row(const std::vector<double>& v) { return v; }

inline std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t c)
{
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

inline FitResult fit_or_note(const FitModel& m, const std::vector<double>& x, const std::vector<double>& y,
                             nlohmann::json& summary)
{
    try {
        return fit_auto(m, x, y);
    } catch (const std::exception& e) {
        FitResult r;
        r.model = m;
        r.params.assign(m.arity(), std::nan(""));
        r.std_errors.assign(m.arity(), std::nan(""));
        r.diagnostic = e.what();
        summary["warnings"].push_back(m.name() + " fit failed: " + e.what());
        return r;
    }
}

// Stretched-exponential fit of visibility against total time; reports the 1/e time.
inline FitResult fit_decay(const std::vector<double>& t, const std::vector<double>& v, nlohmann::json& summary)
{
    return fit_or_note(FitModel{ModelKind::StretchedExponential}, t, v, summary);
}

inline void require(bool ok, const std::string& msg)
{
    if (!ok) throw ConfigError(msg);
}

inline ProtocolOptions protocol_at(double pit_center_mhz)
{
    ProtocolOptions o;
    o.pit_center_mhz = pit_center_mhz;
    return o;
}

// --- optical experiments ---

inline ExperimentResult run_ple(const Context& c)
{
    ExperimentResult out;
    const double span = c.num("span_mhz");
    require(span > 0.0 && c.num("readout_us") > 0.0, "PleScan: span and readout must be > 0");
    const auto det = linspace(-0.5 * span, 0.5 * span, c.count("points"));
    const double bin = 0.5 * span / static_cast<double>(det.size() - 1);
    const SimState base = c.base_state(c.cfg);
    // Each point integrates a non-pumping sweep across its grid bin.
    const auto clean = evaluate(c, det, "detuning_mhz", [&](std::size_t i) {
        PulseSequence seq;
        seq.events.push_back(OpticalPulse{det[i] - bin, det[i] + bin, 0.0, c.num("readout_us"), OpticalRole::Probe});
        return c.probes(seq, base, c.point_seed(i));
    });
    std::vector<double> y;
    for (std::size_t i = 0; i < det.size(); ++i) {
        y.push_back(out.raw.add_point(det[i], c.repetitions(i, clean[i], identity_row))[0]);
    }
    out.fits.push_back(fit_or_note(FitModel{ModelKind::Lorentzian}, det, y, out.summary));
    out.summary["sweep_parameter"] = "optical_detuning_mhz";
    out.summary["inhomogeneous_fwhm_mhz"] = report_detail::number(out.fits[0].params[1]);
    return out;
}

inline ExperimentResult run_shb(const Context& c)
{
    ExperimentResult out;
    out.raw.value_columns = {"signal", "unburned", "hole_depth"};
    const auto det = linspace(-0.5 * c.num("span_mhz"), 0.5 * c.num("span_mhz"), c.count("points"));
    require(c.num("burn_power") >= 0.0 && c.num("burn_duration_us") > 0.0, "Shb: invalid burn settings");
    const SimState base = c.base_state(c.windowed(0.0));
    const auto clean = evaluate(c, det, "detuning_mhz", [&](std::size_t i) {
        PulseSequence burned;
        burned.events.push_back(OpticalPulse{0.0, 0.0, c.num("burn_power"), c.num("burn_duration_us"), OpticalRole::Burn});
        burned.events.push_back(ReadoutWindow{det[i], c.num("readout_us")});
        PulseSequence plain;
        plain.events.push_back(ReadoutWindow{det[i], c.num("readout_us")});
        return std::vector<double>{c.probes(burned, base, c.point_seed(i))[0], c.probes(plain, base, c.point_seed(i))[0]};
    });
    std::vector<double> depth;
    for (std::size_t i = 0; i < det.size(); ++i) {
        const auto m = out.raw.add_point(det[i], c.repetitions(i, clean[i], [](const std::vector<double>& v) {
            return std::vector<double>{v[0], v[1], 1.0 - v[0] / v[1]};
        }));
        depth.push_back(m[2]);
    }
    out.fits.push_back(fit_or_note(FitModel{ModelKind::Lorentzian}, det, depth, out.summary));
    const double fwhm = out.fits[0].params[1];
    out.summary["sweep_parameter"] = "readout_detuning_mhz";
    out.summary["hole_fwhm_khz"] = report_detail::number(fwhm * 1e3);
    // Burn and read profiles each contribute one homogeneous width.
    out.summary["gamma_h_khz"] = report_detail::number(0.5 * fwhm * 1e3);
    out.summary["t2_star_us"] = report_detail::number(fwhm > 0.0 ? linewidth_to_t2star(0.5 * fwhm * 1e3) : std::nan(""));
    return out;
}

inline ExperimentResult run_optical_fid(const Context& c)
{
    ExperimentResult out;
    const auto t = linspace(0.0, c.num("t_max_us"), c.count("points"));
    const double f_het = c.num("f_het_mhz");
    const auto s = optical_fid_signal(t, c.optics.t2_star_opt_us, f_het);
    std::vector<double> y;
    for (std::size_t i = 0; i < t.size(); ++i) y.push_back(out.raw.add_point(t[i], c.repetitions(i, {s[i]}, identity_row))[0]);
    if (f_het > 0.0) {
        out.fits.push_back(fit_or_note(FitModel{ModelKind::DampedCosine}, t, y, out.summary));
        out.summary["t2_star_us"] = report_detail::number(out.fits[0].params[1]);
    } else {
        out.fits.push_back(fit_or_note(FitModel{ModelKind::Exponential}, t, y, out.summary));
        out.summary["t2_star_us"] = report_detail::number(1.0 / out.fits[0].params[1]);
    }
    out.summary["sweep_parameter"] = "time_us";
    return out;
}

inline ExperimentResult run_photon_echo(const Context& c)
{
    ExperimentResult out;
    require(c.num("two_tau_min_us") >= 0.0 && c.num("two_tau_max_us") > c.num("two_tau_min_us"),
            "PhotonEcho: need 0 <= two_tau_min_us < two_tau_max_us");
    const auto t = linspace(c.num("two_tau_min_us"), c.num("two_tau_max_us"), c.count("points"));
    const auto a = photon_echo_amplitude(t, c.optics.t2_opt_us);
    std::vector<double> y;
    for (std::size_t i = 0; i < t.size(); ++i) y.push_back(out.raw.add_point(t[i], c.repetitions(i, {a[i]}, identity_row))[0]);
    out.fits.push_back(fit_or_note(FitModel{ModelKind::Exponential}, t, y, out.summary));
    out.summary["sweep_parameter"] = "two_tau_us";
    out.summary["t2_opt_us"] = report_detail::number(1.0 / out.fits[0].params[1]);
    return out;
}

// --- spin experiments ---

inline ExperimentResult run_pit_t1(const Context& c)
{
    ExperimentResult out;
    out.raw.value_columns = {"signal", "pit_depth"};
    require(c.num("wait_min_s") > 0.0 && c.num("wait_max_s") > c.num("wait_min_s"),
            "PitT1: need 0 < wait_min_s < wait_max_s");
    const auto waits = logspace(c.num("wait_min_s"), c.num("wait_max_s"), c.count("points"));
    const ProtocolOptions o;
    const SimState base = c.base_state(c.windowed(o.pit_center_mhz));
    PulseSequence thermal;
    thermal.events.push_back(center_probe(o));
    const double s_th = c.probes(thermal, base, c.spec.seed)[0];
    const auto clean = evaluate(c, waits, "wait_s", [&](std::size_t i) {
        PulseSequence seq = build_pit_preparation(o);
        seq.events.push_back(Wait{waits[i] * 1e6});
        seq.events.push_back(center_probe(o));
        return std::vector<double>{c.probes(seq, base, c.point_seed(i))[0]};
    });
    std::vector<double> depth;
    for (std::size_t i = 0; i < waits.size(); ++i) {
        const auto m = out.raw.add_point(waits[i], c.repetitions(i, clean[i], [&](const std::vector<double>& v) {
            return std::vector<double>{v[0], 1.0 - v[0] / s_th};
        }));
        depth.push_back(m[1]);
    }
    const FitModel model{ModelKind::DoubleExponential};
    std::vector<double> init = initial_guess(model, waits, depth);
    init[1] = std::sqrt(waits.front() * waits.back()) / 10.0;
    init[3] = std::sqrt(waits.front() * waits.back()) * 2.0;
    FitResult f;
    try {
        f = fit(model, waits, depth, init);
    } catch (const std::exception& e) {
        f = fit_or_note(model, waits, depth, out.summary);
    }
    if (f.params[1] > f.params[3]) {
        std::swap(f.params[0], f.params[2]);
        std::swap(f.params[1], f.params[3]);
        std::swap(f.std_errors[0], f.std_errors[2]);
        std::swap(f.std_errors[1], f.std_errors[3]);
    }
    out.fits.push_back(f);
    out.summary["sweep_parameter"] = "wait_s";
    out.summary["t1_short_s"] = report_detail::number(f.params[1]);
    out.summary["t1_long_s"] = report_detail::number(f.params[3]);
    out.summary["thermal_probe"] = s_th;
    return out;
}

struct LineFit {
    FitResult fit;
    double center_mhz;
    double fwhm_khz;
};

inline LineFit fit_line(const std::vector<double>& f, const std::vector<double>& y, ModelKind shape,
                        nlohmann::json& summary)
{
    LineFit lf{fit_or_note(FitModel{shape}, f, y, summary), 0.0, 0.0};
    lf.center_mhz = lf.fit.params[0];
    lf.fwhm_khz = lf.fit.params[1] * 1e3;
    return lf;
}

inline ModelKind line_shape_model(const std::string& name)
{
    if (name == "Lorentzian") return ModelKind::Lorentzian;
    if (name == "Gaussian") return ModelKind::Gaussian;
    throw ConfigError("fit_shape must be Lorentzian or Gaussian");
}

inline ExperimentResult run_odnmr(const Context& c)
{
    ExperimentResult out;
    const double center = c.num("center_mhz");
    const auto f = linspace(center - 0.5 * c.num("span_mhz"), center + 0.5 * c.num("span_mhz"), c.count("points"));
    require(c.num("rf_power_w") >= 0.0 && c.num("rf_duration_us") > 0.0, "OdnmrScan: invalid RF settings");
    const ModelKind shape = line_shape_model(c.p.at("fit_shape").get<std::string>());
    const ProtocolOptions o;
    const SimState base = c.base_state(c.windowed(o.pit_center_mhz));
    const auto seqs = build_odnmr_scan(f, c.num("rf_power_w"), c.num("rf_duration_us"), o);
    const auto clean = evaluate(c, f, "rf_frequency_mhz", [&](std::size_t i) {
        return std::vector<double>{c.spin_ratio(seqs[i], base, c.point_seed(i))};
    });
    std::vector<double> y;
    for (std::size_t i = 0; i < f.size(); ++i) y.push_back(out.raw.add_point(f[i], c.repetitions(i, clean[i], identity_row))[0]);
    const LineFit lf = fit_line(f, y, shape, out.summary);
    out.fits.push_back(lf.fit);
    out.summary["sweep_parameter"] = "rf_frequency_mhz";
    out.summary["center_mhz"] = report_detail::number(lf.center_mhz);
    out.summary["fwhm_khz"] = report_detail::number(lf.fwhm_khz);
    return out;
}

inline ExperimentResult run_spin_holeburn(const Context& c)
{
    ExperimentResult out;
    out.raw.value_columns = {"signal", "unburned", "difference"};
    const double burn = c.num("burn_mhz");
    const auto f = linspace(burn - 0.5 * c.num("span_mhz"), burn + 0.5 * c.num("span_mhz"), c.count("points"));
    require(c.num("burn_power_w") >= 0.0 && c.num("scan_power_w") >= 0.0 && c.num("scan_duration_us") > 0.0,
            "SpinHoleburn: invalid RF settings");
    const ProtocolOptions o;
    const SimState base = c.base_state(c.windowed(o.pit_center_mhz));
    const auto burned = build_spin_holeburn(burn, c.num("burn_power_w"), f, c.num("scan_power_w"),
                                            c.num("scan_duration_us"), c.k_rabi, o);
    const auto plain = build_odnmr_scan(f, c.num("scan_power_w"), c.num("scan_duration_us"), o);
    const auto clean = evaluate(c, f, "rf_frequency_mhz", [&](std::size_t i) {
        return std::vector<double>{c.spin_ratio(burned[i], base, c.point_seed(i)),
                                   c.spin_ratio(plain[i], base, c.point_seed(i))};
    });
    std::vector<double> diff;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto m = out.raw.add_point(f[i], c.repetitions(i, clean[i], [](const std::vector<double>& v) {
            return std::vector<double>{v[0], v[1], v[0] - v[1]};
        }));
        diff.push_back(m[2]);
    }
    const LineFit lf = fit_line(f, diff, ModelKind::Gaussian, out.summary);
    out.fits.push_back(lf.fit);
    out.summary["sweep_parameter"] = "rf_frequency_mhz";
    out.summary["hole_center_mhz"] = report_detail::number(lf.center_mhz);
    out.summary["hole_fwhm_khz"] = report_detail::number(lf.fwhm_khz);
    if (lf.fwhm_khz > 0.0) {
        const auto t2 = hole_width_to_t2star(lf.fwhm_khz);
        out.summary["t2_star_from_hole_width_us"] = t2.from_hole_width_us;
        out.summary["t2_star_from_half_width_us"] = t2.from_half_width_us;
    }
    return out;
}

inline ExperimentResult run_correlation(const Context& c)
{
    ExperimentResult out;
    out.raw.value_columns = {"signal", "optical_detuning_ghz"};
    const auto det = c.p.at("detunings_ghz").get<std::vector<double>>();
    const double center = c.num("center_mhz");
    const auto f = linspace(center - 0.5 * c.num("span_mhz"), center + 0.5 * c.num("span_mhz"), c.count("points"));
    std::vector<double> sweep;
    std::vector<std::pair<std::size_t, std::size_t>> index;
    for (std::size_t d = 0; d < det.size(); ++d) {
        for (std::size_t k = 0; k < f.size(); ++k) {
            sweep.push_back(f[k]);
            index.emplace_back(d, k);
        }
    }
    std::vector<SimState> bases;
    std::vector<std::vector<PulseSequence>> seqs;
    for (double d : det) {
        bases.push_back(c.base_state(c.windowed(d * 1e3, true)));
        seqs.push_back(build_odnmr_scan(f, c.num("rf_power_w"), c.num("rf_duration_us"), protocol_at(d * 1e3)));
    }
    const auto clean = evaluate(c, sweep, "rf_frequency_mhz", [&](std::size_t i) {
        const auto [d, k] = index[i];
        return std::vector<double>{c.spin_ratio(seqs[d][k], bases[d], c.point_seed(i)), det[d]};
    });
    std::vector<std::vector<double>> y(det.size());
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const auto m = out.raw.add_point(sweep[i], c.repetitions(i, {clean[i][0]}, [&](const std::vector<double>& v) {
            return std::vector<double>{v[0], clean[i][1]};
        }));
        y[index[i].first].push_back(m[0]);
    }
    std::vector<double> centers_khz, fwhms;
    std::vector<double> xs;
    for (std::size_t d = 0; d < det.size(); ++d) {
        const LineFit lf = fit_line(f, y[d], ModelKind::Lorentzian, out.summary);
        out.fits.push_back(lf.fit);
        if (std::isfinite(lf.center_mhz)) {
            xs.push_back(det[d]);
            centers_khz.push_back((lf.center_mhz - center) * 1e3);
        }
        fwhms.push_back(lf.fwhm_khz);
    }
    out.summary["sweep_parameter"] = "rf_frequency_mhz";
    out.summary["detunings_ghz"] = det;
    out.summary["center_shift_khz"] = centers_khz;
    out.summary["fwhm_khz"] = fwhms;
    if (xs.size() >= 2) {
        const auto ols = fit_detail::ols(xs, centers_khz);
        out.summary["gradient_khz_per_ghz"] = ols[1];
        out.summary["gradient_std_error"] = ols[3];
    }
    return out;
}

inline std::vector<double> rabi_durations(const Context& c, double power_w)
{
    double hi = c.num("duration_max_us");
    if (hi <= 0.0) {
        require(c.num("periods") > 0.0, to_string(c.spec.kind) + ": periods must be > 0");
        hi = c.num("periods") * 1e3 / rabi_frequency_khz(power_w, c.k_rabi);
    }
    double lo = c.num("duration_min_us");
    if (lo <= 0.0) lo = hi / static_cast<double>(c.count("points"));
    require(hi > lo, to_string(c.spec.kind) + ": need duration_min_us < duration_max_us");
    return linspace(lo, hi, c.count("points"));
}

inline ExperimentResult run_rabi_powers(const Context& c, const std::vector<double>& powers, bool sweep_power)
{
    ExperimentResult out;
    if (sweep_power) out.raw.value_columns = {"signal", "rf_power_w"};
    for (double p : powers) require(p > 0.0, to_string(c.spec.kind) + ": RF power must be > 0");
    std::vector<std::vector<double>> dur;
    for (double p : powers) dur.push_back(rabi_durations(c, p));
    const double freq = c.num("frequency_mhz");
    const ProtocolOptions o;
    const SimState base = c.base_state(c.windowed(o.pit_center_mhz));
    std::vector<double> sweep;
    std::vector<std::pair<std::size_t, std::size_t>> index;
    for (std::size_t q = 0; q < powers.size(); ++q) {
        for (std::size_t k = 0; k < dur[q].size(); ++k) {
            sweep.push_back(dur[q][k]);
            index.emplace_back(q, k);
        }
    }
    const auto clean = evaluate(c, sweep, "rf_duration_us", [&](std::size_t i) {
        const auto [q, k] = index[i];
        return std::vector<double>{c.spin_ratio(build_rabi(dur[q][k], freq, powers[q], o), base, c.point_seed(i))};
    });
    std::vector<std::vector<double>> y(powers.size());
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const double pw = powers[index[i].first];
        const auto m = out.raw.add_point(sweep[i], c.repetitions(i, clean[i], [&](const std::vector<double>& v) {
            return sweep_power ? std::vector<double>{v[0], pw} : v;
        }));
        y[index[i].first].push_back(m[0]);
    }
    std::vector<double> rabi_khz;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t q = 0; q < powers.size(); ++q) {
        FitResult fr = fit_or_note(FitModel{ModelKind::DampedCosine}, dur[q], y[q], out.summary);
        if (fr.params[2] < 0.0) {
            fr.params[2] = -fr.params[2];
            fr.params[3] = -fr.params[3];
        }
        out.fits.push_back(fr);
        rabi_khz.push_back(fr.params[2] * 1e3);
        per.push_back({{"rf_power_w", powers[q]},
                       {"rabi_khz", report_detail::number(fr.params[2] * 1e3)},
                       {"expected_khz", rabi_frequency_khz(powers[q], c.k_rabi)}});
    }
    out.summary["sweep_parameter"] = "rf_duration_us";
    out.summary["points"] = per;
    if (!sweep_power) {
        out.summary["rabi_khz"] = report_detail::number(rabi_khz[0]);
        out.summary["pi_pulse_us"] = report_detail::number(500.0 / rabi_khz[0]);
    } else {
        FitResult k = fit_or_note(FitModel{ModelKind::SqrtPower}, powers, rabi_khz, out.summary);
        out.fits.push_back(k);
        out.summary["k_rabi_khz_per_sqrt_w"] = report_detail::number(k.params[0]);
        out.summary["k_rabi_std_error"] = report_detail::number(k.std_errors[0]);
    }
    return out;
}

// Visibility curve of one pulse train; x is the total free-evolution time in ms.
struct EchoCurve {
    std::vector<double> total_ms;
    std::vector<double> visibility;
};

inline ExperimentResult run_hahn(const Context& c)
{
    ExperimentResult out;
    out.raw.value_columns = {"signal", "s_plus", "s_minus", "total_time_ms"};
    const double power = c.num("rf_power_w");
    const double freq = c.num("frequency_mhz");
    const double t_pi = pi_pulse_us(power, c.k_rabi);
    const double t_gap = c.opts.pulse_model == PulseModel::Hard ? 0.0 : t_pi;
    double lo = c.num("tau_min_us"), hi = c.num("tau_max_us");
    if (lo <= 0.0 || hi <= 0.0) {
        // Grid in tau around the expected 1/e echo time 2 tau + t_pi.
        const double te = cpmg_one_over_e_time(1, c.noise.ou_sigma, c.noise.ou_tau_c) * 1e6; // us
        const double auto_lo = std::isfinite(te) ? std::max(0.5 * (0.05 * te - t_gap), 1.05 * t_pi) : 1.1 * t_pi;
        const double auto_hi = std::isfinite(te) ? std::max(0.5 * (2.0 * te - t_gap), 2.0 * auto_lo) : 1000.0;
        if (lo <= 0.0) lo = auto_lo;
        if (hi <= 0.0) hi = auto_hi;
    }
    require(hi > lo, "HahnEcho: tau_max_us must exceed tau_min_us");
    const auto tau = linspace(lo, hi, c.count("points"));
    ProtocolOptions o;
    o.hahn_pi_phase_deg = c.num("pi_phase_deg");
    const double inv = inverting_final_phase(1, o.hahn_pi_phase_deg);
    const SimState base = c.base_state(c.windowed(o.pit_center_mhz));
    const auto clean = evaluate(c, tau, "tau_us", [&](std::size_t i) {
        const std::uint64_t seed = c.point_seed(i); // shared by both variants
        return std::vector<double>{
            c.spin_ratio(build_hahn_echo(tau[i], freq, power, inv, c.k_rabi, o), base, seed),
            c.spin_ratio(build_hahn_echo(tau[i], freq, power, normalize_phase_deg(inv + 180.0), c.k_rabi, o), base, seed)};
    });
    EchoCurve curve;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double total = (2.0 * tau[i] + t_gap) * 1e-3; // between the pi/2 pulses
        const auto m = out.raw.add_point(tau[i], c.repetitions(i, clean[i], [&](const std::vector<double>& v) {
            return std::vector<double>{visibility({v[0]}, {v[1]}).values[0], v[0], v[1], total};
        }));
        curve.total_ms.push_back(total);
        curve.visibility.push_back(m[0]);
    }
    const FitResult f = fit_decay(curve.total_ms, curve.visibility, out.summary);
    out.fits.push_back(f);
    out.summary["sweep_parameter"] = "tau_us";
    out.summary["t2_echo_ms"] = report_detail::number(f.params[1]);
    out.summary["stretch"] = report_detail::number(f.params[2]);
    return out;
}

inline std::vector<int> pulse_counts(const Context& c)
{
    std::vector<int> n;
    for (long long v : c.p.at("n_list").get<std::vector<long long>>()) {
        require(v >= 1, to_string(c.spec.kind) + ": pulse counts must be >= 1");
        n.push_back(static_cast<int>(v));
    }
    return n;
}

inline ExperimentResult run_cpmg(const Context& c)
{
    ExperimentResult out;
    out.raw.value_columns = {"signal", "s_plus", "s_minus", "n_pulses", "tau_us"};
    const double power = c.num("rf_power_w");
    const double freq = c.num("frequency_mhz");
    const double t_pi = pi_pulse_us(power, c.k_rabi);
    const double t_gap = c.opts.pulse_model == PulseModel::Hard ? 0.0 : t_pi;
    const auto ns = pulse_counts(c);
    const std::size_t npts = c.count("points");
    std::vector<double> sweep, taus;
    std::vector<std::size_t> which;
    for (std::size_t j = 0; j < ns.size(); ++j) {
        const int n = ns[j];
        // Total time between the pi/2 pulses is n (tau + t_gap); the builder needs tau > t_pi.
        const double min_total = n * (1.05 * t_pi + t_gap) * 1e-3; // ms
        double hi = c.num("t_max_ms");
        double lo = hi / 40.0;
        if (hi <= 0.0) {
            const double te = cpmg_one_over_e_time(n, c.noise.ou_sigma, c.noise.ou_tau_c) * 1e3;
            require(std::isfinite(te), "Cpmg: t_max_ms is required when the bath coupling is zero");
            lo = 0.05 * te;
            hi = 2.0 * te;
        }
        lo = std::max(lo, min_total);
        require(hi > lo, "Cpmg: t_max_ms too short for N = " + std::to_string(n));
        for (double t : linspace(lo, hi, npts)) {
            sweep.push_back(t);
            taus.push_back(t * 1e3 / n - t_gap);
            which.push_back(j);
        }
    }
    const ProtocolOptions o;
    const SimState base = c.base_state(c.windowed(o.pit_center_mhz));
    const auto clean = evaluate(c, sweep, "total_time_ms", [&](std::size_t i) {
        const int n = ns[which[i]];
        const double inv = inverting_final_phase(n, 90.0);
        const std::uint64_t seed = c.point_seed(i);
        return std::vector<double>{
            c.spin_ratio(build_cpmg(n, taus[i], freq, power, inv, c.k_rabi, o), base, seed),
            c.spin_ratio(build_cpmg(n, taus[i], freq, power, normalize_phase_deg(inv + 180.0), c.k_rabi, o), base, seed)};
    });
    std::vector<EchoCurve> curves(ns.size());
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const double n = ns[which[i]];
        const auto m = out.raw.add_point(sweep[i], c.repetitions(i, clean[i], [&](const std::vector<double>& v) {
            return std::vector<double>{visibility({v[0]}, {v[1]}).values[0], v[0], v[1], n, taus[i]};
        }));
        curves[which[i]].total_ms.push_back(sweep[i]);
        curves[which[i]].visibility.push_back(m[0]);
    }
    std::vector<std::pair<double, double>> t2;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t j = 0; j < ns.size(); ++j) {
        const FitResult f = fit_decay(curves[j].total_ms, curves[j].visibility, out.summary);
        out.fits.push_back(f);
        per.push_back({{"n", ns[j]}, {"t2_ms", report_detail::number(f.params[1])}, {"stretch", report_detail::number(f.params[2])}});
        if (std::isfinite(f.params[1]) && f.params[1] > 0.0) t2.emplace_back(ns[j], f.params[1]);
    }
    out.summary["sweep_parameter"] = "total_time_ms";
    out.summary["curves"] = per;
    bool monotone = true;
    for (std::size_t j = 1; j < t2.size(); ++j) monotone = monotone && t2[j].second > t2[j - 1].second;
    out.summary["t2_monotone_in_n"] = monotone;
    try {
        const ScalingFit s = fit_scaling(t2);
        out.summary["beta"] = s.beta;
        out.summary["beta_std_error"] = s.beta_std_error;
        out.summary["t2_echo_ms"] = s.t2_echo;
    } catch (const std::exception& e) {
        out.summary["warnings"].push_back(std::string("scaling fit: ") + e.what());
    }
    if (c.p.at("fit_bath").get<bool>()) {
        std::vector<CpmgCurve> cc;
        for (std::size_t j = 0; j < ns.size(); ++j) {
            CpmgCurve cv;
            cv.n = ns[j];
            for (std::size_t k = 0; k < curves[j].total_ms.size(); ++k) {
                cv.tau_s.push_back(curves[j].total_ms[k] * 1e-3 / ns[j]);
                cv.visibility.push_back(curves[j].visibility[k]);
            }
            cc.push_back(std::move(cv));
        }
        try {
            const OuBathFit b = fit_ou_bath(cc);
            out.summary["bath"] = {{"sigma_rad_s", b.sigma},       {"tau_c_s", b.tau_c},
                                   {"sigma_std_error", b.sigma_std_error}, {"tau_c_std_error", b.tau_c_std_error},
                                   {"amplitudes", b.amplitudes},    {"converged", b.converged},
                                   {"diagnostic", b.diagnostic}};
        } catch (const std::exception& e) {
            out.summary["warnings"].push_back(std::string("bath fit: ") + e.what());
        }
    }
    return out;
}

inline ExperimentResult run_scaling(const Context& c)
{
    ExperimentResult out;
    out.raw.value_columns = {"signal", "n_pulses", "tau_s"};
    require(c.noise.ou_sigma > 0.0, "ScalingStudy: needs a bath with ou_sigma > 0");
    const auto ns = pulse_counts(c);
    const std::size_t npts = c.count("points");
    std::vector<EchoCurve> curves(ns.size());
    std::size_t i = 0;
    double worst_x = 0.0;
    for (std::size_t j = 0; j < ns.size(); ++j) {
        const int n = ns[j];
        const double te = cpmg_one_over_e_time(n, c.noise.ou_sigma, c.noise.ou_tau_c);
        for (double t : linspace(0.02 * te, 2.0 * te, npts)) {
            const double tau = t / n;
            worst_x = std::max(worst_x, tau / c.noise.ou_tau_c);
            const double v = ou_visibility_analytic(n, tau, c.noise.ou_sigma, c.noise.ou_tau_c);
            const auto m = out.raw.add_point(t * 1e3, c.repetitions(i++, {v}, [&](const std::vector<double>& r) {
                return std::vector<double>{r[0], static_cast<double>(n), tau};
            }));
            curves[j].total_ms.push_back(t * 1e3);
            curves[j].visibility.push_back(m[0]);
        }
    }
    std::vector<std::pair<double, double>> t2;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t j = 0; j < ns.size(); ++j) {
        const FitResult f = fit_decay(curves[j].total_ms, curves[j].visibility, out.summary);
        out.fits.push_back(f);
        per.push_back({{"n", ns[j]}, {"t2_ms", report_detail::number(f.params[1])}, {"stretch", report_detail::number(f.params[2])}});
        if (std::isfinite(f.params[1]) && f.params[1] > 0.0) t2.emplace_back(ns[j], f.params[1]);
    }
    const ScalingFit s = fit_scaling(t2);
    out.summary["sweep_parameter"] = "total_time_ms";
    out.summary["curves"] = per;
    out.summary["beta"] = s.beta;
    out.summary["beta_std_error"] = s.beta_std_error;
    out.summary["t2_echo_ms"] = s.t2_echo;
    out.summary["max_tau_over_tau_c"] = worst_x;
    return out;
}

} // namespace exp_detail

// Runs one experiment end to end: sweep, raw table, fits and derived quantities.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const EnsembleConfig& cfg, const NoiseModel& noise,
                                       const OpticalModel& optics, double k_rabi = kDefaultRabiKhzPerSqrtW,
                                       const RunOptions& opts = {})
{
    cfg.validate();
    noise.validate();
    optics.validate();
    if (!(k_rabi > 0.0)) throw ConfigError("k_rabi must be > 0");
    const exp_detail::Context c{spec, resolve_params(spec), cfg, noise, optics, k_rabi, opts};
    ExperimentResult out;
    switch (spec.kind) {
    case ExperimentKind::PleScan: out = exp_detail::run_ple(c); break;
    case ExperimentKind::Shb: out = exp_detail::run_shb(c); break;
    case ExperimentKind::OpticalFid: out = exp_detail::run_optical_fid(c); break;
    case ExperimentKind::PhotonEcho: out = exp_detail::run_photon_echo(c); break;
    case ExperimentKind::PitT1: out = exp_detail::run_pit_t1(c); break;
    case ExperimentKind::OdnmrScan: out = exp_detail::run_odnmr(c); break;
    case ExperimentKind::SpinHoleburn: out = exp_detail::run_spin_holeburn(c); break;
    case ExperimentKind::CorrelationScan: out = exp_detail::run_correlation(c); break;
    case ExperimentKind::Rabi: out = exp_detail::run_rabi_powers(c, {c.num("rf_power_w")}, false); break;
    case ExperimentKind::RabiPowerSweep:
        out = exp_detail::run_rabi_powers(c, c.p.at("powers_w").get<std::vector<double>>(), true);
        break;
    case ExperimentKind::HahnEcho: out = exp_detail::run_hahn(c); break;
    case ExperimentKind::Cpmg: out = exp_detail::run_cpmg(c); break;
    case ExperimentKind::ScalingStudy: out = exp_detail::run_scaling(c); break;
    }
    out.kind = spec.kind;
    out.summary["kind"] = to_string(spec.kind);
    out.summary["parameters"] = c.p;
    return out;
}

} // namespace odnmr
