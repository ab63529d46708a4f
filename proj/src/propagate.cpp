#include "adhops/propagate.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace adhops::hops {

std::size_t PropagationOptions::n_steps() const {
    return static_cast<std::size_t>(std::llround(t_max / dt));
}

void PropagationOptions::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("propagation: dt must be > 0");
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw std::invalid_argument("propagation: t_max must be >= 0");
    const double steps = t_max / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
        throw std::invalid_argument("propagation: t_max must be a multiple of dt");
    }
    if (output_stride < 1) throw std::invalid_argument("propagation: output_stride must be >= 1");
    if (k_max < 0) throw std::invalid_argument("propagation: k_max must be >= 0");
    adaptive.validate();
}

namespace {

struct Workspace {
    std::vector<cplx> k1, k2, k3, k4, tmp;
    std::vector<cplx> u1, u2, u3, u4, utmp;

    void resize(std::size_t n, std::size_t m) {
        for (auto* v : {&k1, &k2, &k3, &k4, &tmp}) v->assign(n, cplx{0.0, 0.0});
        for (auto* v : {&u1, &u2, &u3, &u4, &utmp}) v->assign(m, cplx{0.0, 0.0});
    }
};

bool same_basis(const BasisLayout& layout, const adaptive::BasisChoice& choice) {
    return layout.states == choice.states && layout.aux_id == choice.aux_ids;
}

}  // namespace

TrajectoryRecord propagate_trajectory(const HopsSystem& system, const std::vector<cplx>& initial,
                                      const std::vector<cplx>& bra, const noise::NoiseTrajectory& noise,
                                      const PropagationOptions& options,
                                      std::shared_ptr<const BasisLayout> full_layout, StateHistory* history) {
    options.validate();
    const std::size_t ns_sys = system.n_states();
    const std::size_t n_modes = system.n_modes();
    if (initial.size() != ns_sys || bra.size() != ns_sys) {
        throw std::invalid_argument("propagation: initial state and bra need one amplitude per system state");
    }
    const std::size_t n_steps = options.n_steps();
    if (std::abs(noise.dt - options.dt) > 1e-12 * options.dt || noise.n_steps < n_steps ||
        noise.pigments() < system.n_channels()) {
        throw std::invalid_argument("propagation: noise grid does not cover the integration grid");
    }
    const double dt = options.dt;
    const double e_ref = options.e_ref.value_or(
        std::accumulate(system.energies.begin(), system.energies.end(), 0.0) / static_cast<double>(ns_sys));
    const bool adaptive_on = options.adaptive.enabled();
    const auto& kernels = simd::active();

    std::vector<std::size_t> support;
    for (std::size_t s = 0; s < ns_sys; ++s) {
        if (initial[s] != cplx{0.0, 0.0}) support.push_back(s);
    }
    if (support.empty()) throw std::invalid_argument("propagation: initial state is zero");

    hierarchy::IndexRegistry registry;  // outlives every adaptive layout below
    std::shared_ptr<const BasisLayout> layout;
    if (adaptive_on) {
        layout = std::make_shared<const BasisLayout>(BasisLayout::build(system, support, registry, {0u}));
    } else if (full_layout) {
        if (full_layout->n_states() != ns_sys) throw std::invalid_argument("propagation: shared layout does not match system");
        layout = std::move(full_layout);
    } else {
        layout = std::make_shared<const BasisLayout>(BasisLayout::full(system, options.k_max));
    }

    std::vector<cplx> psi(layout->size(), cplx{0.0, 0.0});
    for (std::size_t p = 0; p < layout->n_states(); ++p) psi[p] = initial[layout->states[p]];
    std::vector<cplx> u(n_modes, cplx{0.0, 0.0});

    TrajectoryRecord rec;
    rec.seed = noise.seed;
    rec.trajectory = noise.trajectory;

    auto record = [&](std::size_t step) {
        const double t = dt * static_cast<double>(step);
        cplx ov{0.0, 0.0};
        for (std::size_t p = 0; p < layout->n_states(); ++p) ov += std::conj(bra[layout->states[p]]) * psi[p];
        ov *= std::exp(cplx{0.0, -e_ref * t / units::hbar});
        rec.t.push_back(t);
        rec.overlap.push_back(ov);
        rec.norm2.push_back(physical_norm2(*layout, psi));
        rec.n_aux.push_back(static_cast<std::uint32_t>(layout->n_aux()));
        rec.n_state.push_back(static_cast<std::uint32_t>(layout->n_states()));
        if (history) {
            std::vector<cplx> full(ns_sys, cplx{0.0, 0.0});
            for (std::size_t p = 0; p < layout->n_states(); ++p) full[layout->states[p]] = psi[p] * std::exp(cplx{0.0, -e_ref * t / units::hbar});
            history->physical.push_back(std::move(full));
        }
    };

    DriveTerms drive;
    auto set_drive = [&](std::span<const cplx> psi_s, std::span<const cplx> u_s, std::size_t k, int where) {
        // where: 0 = t_k, 1 = midpoint, 2 = t_{k+1}
        drive.expect = expectations(system, *layout, psi_s, options.normalization);
        drive.zxi = memory_drift(system, u_s);
        for (std::size_t n = 0; n < system.n_channels(); ++n) {
            cplx z = noise.z[n][k];
            if (options.noise_sampling == NoiseSampling::linear && where > 0) {
                z = where == 1 ? 0.5 * (noise.z[n][k] + noise.z[n][k + 1]) : noise.z[n][k + 1];
            }
            drive.zxi[n] += std::conj(z);
        }
    };

    Workspace ws;
    ws.resize(psi.size(), n_modes);
    adaptive::CandidateSpace candidates;
    record(0);

    for (std::size_t step = 0; step < n_steps; ++step) {
        if (adaptive_on && step % static_cast<std::size_t>(options.adaptive.update_stride) == 0) {
            set_drive(psi, u, step, 0);
            static const std::vector<std::size_t> none;
            if (candidates.basis != layout) {
                candidates = adaptive::build_candidates(system, layout, options.k_max, &registry);
            }
            const auto choice = adaptive::choose_basis(system, candidates, psi, drive, e_ref, options.adaptive,
                                                       step == 0 ? support : none);
            if (!same_basis(*layout, choice)) {
                auto next = std::make_shared<const BasisLayout>(
                    BasisLayout::build(system, choice.states, registry, choice.aux_ids));
                psi = apply_basis_change(*layout, psi, *next);
                layout = std::move(next);
                ws.resize(psi.size(), n_modes);
            }
        }
        const std::size_t n = psi.size();

        if (options.memory == MemoryScheme::frozen) {
            set_drive(psi, u, step, 0);
            const std::vector<double> expect0 = drive.expect;
            const std::vector<cplx> xi0 = memory_drift(system, u);
            auto drive_at = [&](int where) {
                drive.expect = expect0;
                drive.zxi = xi0;
                for (std::size_t c = 0; c < system.n_channels(); ++c) {
                    cplx z = noise.z[c][step];
                    if (options.noise_sampling == NoiseSampling::linear && where > 0) {
                        z = where == 1 ? 0.5 * (noise.z[c][step] + noise.z[c][step + 1]) : noise.z[c][step + 1];
                    }
                    drive.zxi[c] += std::conj(z);
                }
            };
            drive_at(0);
            hops_derivative(system, *layout, drive, e_ref, psi, ws.k1, kernels);
            kernels.stage(ws.tmp.data(), psi.data(), 0.5 * dt, ws.k1.data(), n);
            drive_at(1);
            hops_derivative(system, *layout, drive, e_ref, ws.tmp, ws.k2, kernels);
            kernels.stage(ws.tmp.data(), psi.data(), 0.5 * dt, ws.k2.data(), n);
            hops_derivative(system, *layout, drive, e_ref, ws.tmp, ws.k3, kernels);
            kernels.stage(ws.tmp.data(), psi.data(), dt, ws.k3.data(), n);
            drive_at(2);
            hops_derivative(system, *layout, drive, e_ref, ws.tmp, ws.k4, kernels);
            kernels.rk4_combine(psi.data(), ws.k1.data(), ws.k2.data(), ws.k3.data(), ws.k4.data(), dt, n);
            update_memory(system, expect0, dt, u);
        } else {
            auto eval = [&](std::span<const cplx> p, std::span<const cplx> us, int where, std::vector<cplx>& kp,
                            std::vector<cplx>& ku) {
                set_drive(p, us, step, where);
                hops_derivative(system, *layout, drive, e_ref, p, kp, kernels);
                memory_derivative(system, drive.expect, us, ku);
            };
            auto ustage = [&](double h, const std::vector<cplx>& k) {
                for (std::size_t j = 0; j < n_modes; ++j) ws.utmp[j] = u[j] + h * k[j];
            };
            eval(psi, u, 0, ws.k1, ws.u1);
            kernels.stage(ws.tmp.data(), psi.data(), 0.5 * dt, ws.k1.data(), n);
            ustage(0.5 * dt, ws.u1);
            eval(ws.tmp, ws.utmp, 1, ws.k2, ws.u2);
            kernels.stage(ws.tmp.data(), psi.data(), 0.5 * dt, ws.k2.data(), n);
            ustage(0.5 * dt, ws.u2);
            eval(ws.tmp, ws.utmp, 1, ws.k3, ws.u3);
            kernels.stage(ws.tmp.data(), psi.data(), dt, ws.k3.data(), n);
            ustage(dt, ws.u3);
            eval(ws.tmp, ws.utmp, 2, ws.k4, ws.u4);
            kernels.rk4_combine(psi.data(), ws.k1.data(), ws.k2.data(), ws.k3.data(), ws.k4.data(), dt, n);
            kernels.rk4_combine(u.data(), ws.u1.data(), ws.u2.data(), ws.u3.data(), ws.u4.data(), dt, n_modes);
        }

        const double total = kernels.norm2(psi.data(), n);
        if (!std::isfinite(total)) {
            std::ostringstream msg;
            msg << "propagation: non-finite amplitudes at t = " << dt * static_cast<double>(step + 1)
                << " fs (trajectory " << noise.trajectory << ", basis " << layout->n_aux() << " aux x "
                << layout->n_states() << " states)";
            throw TrajectoryError(msg.str());
        }
        if ((step + 1) % static_cast<std::size_t>(options.output_stride) == 0) record(step + 1);
    }
    return rec;
}

void write_record(const std::string& path, const TrajectoryRecord& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("record: cannot open " + path);
    out << "# seed " << r.seed << " trajectory " << r.trajectory << '\n';
    if (!r.info.empty()) out << "# " << r.info << '\n';
    out << "# t_fs re_overlap im_overlap norm2 n_aux n_state\n" << std::setprecision(17);
    for (std::size_t i = 0; i < r.size(); ++i) {
        out << r.t[i] << ' ' << r.overlap[i].real() << ' ' << r.overlap[i].imag() << ' ' << r.norm2[i] << ' '
            << r.n_aux[i] << ' ' << r.n_state[i] << '\n';
    }
    if (!out) throw std::runtime_error("record: write failed for " + path);
}

TrajectoryRecord read_record(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("record: cannot open " + path);
    TrajectoryRecord r;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            hs >> key;
            if (key == "seed") {
                std::string k2;
                hs >> r.seed >> k2 >> r.trajectory;
            }
            continue;
        }
        std::istringstream ls(line);
        double t, re, im, n2;
        std::uint32_t na, nst;
        if (!(ls >> t >> re >> im >> n2 >> na >> nst)) throw std::runtime_error("record: malformed line in " + path);
        r.t.push_back(t);
        r.overlap.emplace_back(re, im);
        r.norm2.push_back(n2);
        r.n_aux.push_back(na);
        r.n_state.push_back(nst);
    }
    return r;
}

}  // namespace adhops::hops
