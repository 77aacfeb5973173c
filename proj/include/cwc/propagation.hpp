#pragma once

// Wave propagation by eigen-expansion: project initial data on an eigenset,
// evolve the coefficients in closed form, synthesize (full set) or recover by
// weighted l1 (partial set).

#include <cwc/eigensolver.hpp>
#include <cwc/grid_medium.hpp>
#include <cwc/operators.hpp>
#include <cwc/recovery.hpp>
#include <cwc/rng.hpp>
#include <cwc/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace cwc {

struct InitialData {
	Vector u0; // displacement
	Vector u1; // velocity
};

inline void check_data(const Medium& medium, const InitialData& data) {
	const auto n = static_cast<Eigen::Index>(medium.size());
	require(data.u0.size() == n && data.u1.size() == n, "initial data length does not match grid");
}

/// Gaussian exp(-d^2 / 2 std^2) sampled on the grid; d wraps around when periodic.
inline Vector gaussian_bump(const Grid& grid, double center, double std) {
	require(std > 0.0, "bump width must be positive");
	Vector b(grid.size());
	for (std::size_t j = 0; j < grid.size(); ++j) {
		double d = grid.position(j) - center;
		if (grid.periodic())
			d -= std::round(d);
		b[static_cast<Eigen::Index>(j)] = std::exp(-0.5 * d * d / (std * std));
	}
	return b;
}

/// Second derivative of a gaussian, scaled to unit peak magnitude.
inline Vector ricker_bump(const Grid& grid, double center, double std) {
	Vector b(grid.size());
	for (std::size_t j = 0; j < grid.size(); ++j) {
		double d = grid.position(j) - center;
		if (grid.periodic())
			d -= std::round(d);
		const double z = d / std;
		b[static_cast<Eigen::Index>(j)] = (z * z - 1.0) * std::exp(-0.5 * z * z);
	}
	return b / b.cwiseAbs().maxCoeff();
}

struct CoefficientVector {
	Vector omega;
	Vector c0;
	Vector c1;
};

inline CoefficientVector project_initial_data(const EigenSet& set, const Medium& medium, const InitialData& data) {
	check_data(medium, data);
	const Matrix V = set.vectors();
	require(V.rows() == data.u0.size(), "eigenset does not match medium");
	const Vector m = medium.mass();
	return {set.omegas(), V.transpose() * m.cwiseProduct(data.u0), V.transpose() * m.cwiseProduct(data.u1)};
}

namespace detail {

/// sin(w t) / w with the w = 0 limit t.
inline double sin_over(double w, double t) {
	return w == 0.0 ? t : std::sin(w * t) / w;
}

} // namespace detail

/// c(t) = cos(w t) c0 + sin(w t)/w c1. Negative t runs backwards.
inline Vector evolve_coefficients(const CoefficientVector& c, double t) {
	Vector out(c.omega.size());
	for (Eigen::Index i = 0; i < out.size(); ++i)
		out[i] = std::cos(c.omega[i] * t) * c.c0[i] + detail::sin_over(c.omega[i], t) * c.c1[i];
	return out;
}

/// c'(t) = -w sin(w t) c0 + cos(w t) c1.
inline Vector evolve_derivative(const CoefficientVector& c, double t) {
	Vector out(c.omega.size());
	for (Eigen::Index i = 0; i < out.size(); ++i)
		out[i] = -c.omega[i] * std::sin(c.omega[i] * t) * c.c0[i] + std::cos(c.omega[i] * t) * c.c1[i];
	return out;
}

struct Wavefield {
	double t = 0.0;
	Vector u;
	Vector ut; // empty when not computed
};

/// Full-basis propagation: the oracle every compressive result is compared to.
class ReferencePropagator {
public:
	explicit ReferencePropagator(const Medium& medium) : ReferencePropagator(medium, full_decomposition(WaveOperator(medium))) {}

	ReferencePropagator(const Medium& medium, EigenSet full) : medium_(medium), full_(std::move(full)) {
		require(full_.k() == medium.size(), "reference propagation needs the complete eigenset");
		V_ = full_.vectors();
	}

	const Medium& medium() const { return medium_; }
	const EigenSet& basis() const { return full_; }

	CoefficientVector project(const InitialData& data) const { return project_initial_data(full_, medium_, data); }

	Wavefield solve(const InitialData& data, double t) const {
		const CoefficientVector c = project(data);
		return {t, V_ * evolve_coefficients(c, t), V_ * evolve_derivative(c, t)};
	}

	/// Displacements at several times, one column per time.
	Matrix fields(const InitialData& data, const std::vector<double>& times) const {
		const CoefficientVector c = project(data);
		Matrix C(V_.cols(), static_cast<Eigen::Index>(times.size()));
		for (std::size_t i = 0; i < times.size(); ++i)
			C.col(static_cast<Eigen::Index>(i)) = evolve_coefficients(c, times[i]);
		return V_ * C;
	}

	/// Velocities at several times.
	Matrix velocities(const InitialData& data, const std::vector<double>& times) const {
		const CoefficientVector c = project(data);
		Matrix C(V_.cols(), static_cast<Eigen::Index>(times.size()));
		for (std::size_t i = 0; i < times.size(); ++i)
			C.col(static_cast<Eigen::Index>(i)) = evolve_derivative(c, times[i]);
		return V_ * C;
	}

private:
	Medium medium_;
	EigenSet full_;
	Matrix V_;
};

inline Wavefield reference_solution(const Medium& medium, const InitialData& data, double t) {
	return ReferencePropagator(medium).solve(data, t);
}

inline RecoveryConfig propagation_recovery_defaults() {
	RecoveryConfig r;
	r.coarse_stage_tol = 1e-4;
	return r;
}

struct PropagationConfig {
	RecoveryConfig recovery = propagation_recovery_defaults(); // epsilon is replaced per solve
	double epsilon_rel = 1e-8; // epsilon = epsilon_rel * ||c(t)||
	DrawOptions draw;
};

/// Recovers u(t) for every t from the set's evolved coefficients, all times
/// solved in one batch.
inline std::vector<RecoveryResult> compressive_fields(const EigenSet& set, const Medium& medium, const InitialData& data,
                                                      const std::vector<double>& times, const PropagationConfig& cfg) {
	require(cfg.epsilon_rel >= 0.0, "epsilon_rel must be non-negative");
	const CoefficientVector c = project_initial_data(set, medium, data);
	const MeasurementOperator phi(set, medium);
	Matrix C(phi.k(), static_cast<Eigen::Index>(times.size()));
	std::vector<double> eps(times.size());
	for (std::size_t i = 0; i < times.size(); ++i) {
		C.col(static_cast<Eigen::Index>(i)) = evolve_coefficients(c, times[i]);
		eps[i] = cfg.epsilon_rel * C.col(static_cast<Eigen::Index>(i)).norm();
	}
	return ist_solve_batch(phi, C, cfg.recovery, eps);
}

template <EigenResolver R>
Wavefield compressive_solve(const R& resolver, const Medium& medium, const InitialData& data, double t, std::size_t k,
                            std::uint64_t seed, const PropagationConfig& cfg = {}) {
	const EigenSet set = draw_eigenset(resolver, k, seed, cfg.draw);
	return {t, std::move(compressive_fields(set, medium, data, {t}, cfg).front().x), {}};
}

/// Matrix-free variant: eigenpairs come from shift-invert.
inline Wavefield compressive_solve(const Medium& medium, const InitialData& data, double t, std::size_t k,
                                   std::uint64_t seed, const PropagationConfig& cfg = {}) {
	const WaveOperator op(medium);
	return compressive_solve(ShiftInvertResolver(op), medium, data, t, k, seed, cfg);
}

/// n_t equispaced times T i / n_t, i = 0..n_t-1.
inline std::vector<double> time_grid(double T, int n_t) {
	require(n_t >= 1 && T >= 0.0, "time grid needs n_t >= 1 and T >= 0");
	std::vector<double> t(static_cast<std::size_t>(n_t));
	for (int i = 0; i < n_t; ++i)
		t[static_cast<std::size_t>(i)] = T * i / n_t;
	return t;
}

struct ErrorStatistic {
	std::size_t k = 0;
	double err = 0.0;      // normalized as sum sq / (N n_t |sets| ||u||)
	double relative = 0.0; // sqrt(sum sq / (|sets| ||u||^2))
	std::vector<std::uint64_t> seeds;
	std::vector<double> set_err;
	std::vector<double> set_relative;
	int unconverged = 0;
};

struct ErrorOptions {
	std::size_t trials = 10;
	int n_t = 100;
	double final_time = 0.0; // 0: the medium's crossing time
	std::uint64_t seed = 0;
	PropagationConfig propagation;
};

inline std::size_t k_from_fraction(double k_over_n, std::size_t size) {
	require(k_over_n > 0.0 && k_over_n <= 1.0, "k/n must lie in (0, 1]");
	return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(k_over_n * static_cast<double>(size))), 1, size);
}

/// Space-time l2 error of compressive against reference propagation, over
/// random eigensets of size k_over_n * N. ||u|| is the space-time l2 norm of
/// the reference over the same time grid.
template <EigenResolver R>
ErrorStatistic error_measure(const R& resolver, const ReferencePropagator& reference, const InitialData& data, double k_over_n,
                             const ErrorOptions& opt) {
	require(opt.trials >= 1, "error measure needs at least one trial");
	const Medium& medium = reference.medium();
	const double T = opt.final_time > 0.0 ? opt.final_time : medium.crossing_time();
	const std::vector<double> times = time_grid(T, opt.n_t);
	const Matrix U = reference.fields(data, times);
	const double unorm = U.norm();
	require(unorm > 0.0, "error measure needs nonzero data");
	const double N = static_cast<double>(medium.size());

	ErrorStatistic out;
	out.k = k_from_fraction(k_over_n, medium.size());
	double total = 0.0;
	for (std::size_t s = 0; s < opt.trials; ++s) {
		const std::uint64_t seed = derive_seed(opt.seed, "error-set", s);
		const EigenSet set = draw_eigenset(resolver, out.k, seed, opt.propagation.draw);
		const auto solves = compressive_fields(set, medium, data, times, opt.propagation);
		double sq = 0.0;
		for (std::size_t i = 0; i < times.size(); ++i) {
			sq += (solves[i].x - U.col(static_cast<Eigen::Index>(i))).squaredNorm();
			out.unconverged += solves[i].converged ? 0 : 1;
		}
		total += sq;
		out.seeds.push_back(seed);
		out.set_err.push_back(std::sqrt(sq / (N * opt.n_t * unorm)));
		out.set_relative.push_back(std::sqrt(sq) / unorm);
	}
	const double sets = static_cast<double>(opt.trials);
	out.err = std::sqrt(total / (N * opt.n_t * sets * unorm));
	out.relative = std::sqrt(total / sets) / unorm;
	return out;
}

// ---------------------------------------------------------------------------
// Sparsity enhancement.

/// Splits the data into L pieces on contiguous windows of equal l1 mass of
/// u0 (of u1 when u0 vanishes); u1 is cut on the same windows.
inline std::vector<InitialData> split_initial_data(const InitialData& data, std::size_t L) {
	require(L >= 1, "split count must be >= 1");
	require(data.u0.size() == data.u1.size(), "initial data lengths differ");
	const Eigen::Index n = data.u0.size();
	const Vector& ref = data.u0.cwiseAbs().sum() > 0.0 ? data.u0 : data.u1;
	const auto nonzero = static_cast<std::size_t>((ref.array() != 0.0).count());
	require(L <= nonzero, "more pieces requested than nonzero samples");
	const double total = ref.cwiseAbs().sum();

	// Window l ends after the first sample where the running mass reaches
	// (l+1)/L of the total, keeping at least one nonzero sample per window.
	std::vector<Eigen::Index> ends;
	double running = 0.0;
	std::size_t seen = 0, seen_at_cut = 0;
	for (Eigen::Index j = 0; j < n && ends.size() + 1 < L; ++j) {
		running += std::abs(ref[j]);
		seen += ref[j] != 0.0 ? 1 : 0;
		const std::size_t left = nonzero - seen;
		const std::size_t needed = L - ends.size() - 1;
		const double target = total * static_cast<double>(ends.size() + 1) / static_cast<double>(L);
		if (seen > seen_at_cut && left >= needed && (running >= target || left == needed)) {
			ends.push_back(j + 1);
			seen_at_cut = seen;
		}
	}
	ends.push_back(n);

	std::vector<InitialData> parts;
	Eigen::Index begin = 0;
	for (Eigen::Index end : ends) {
		InitialData p{Vector::Zero(n), Vector::Zero(n)};
		p.u0.segment(begin, end - begin) = data.u0.segment(begin, end - begin);
		p.u1.segment(begin, end - begin) = data.u1.segment(begin, end - begin);
		parts.push_back(std::move(p));
		begin = end;
	}
	return parts;
}

/// Each piece of the data recovered separately on the same eigenset, then summed.
inline Wavefield split_solve(const EigenSet& set, const Medium& medium, const InitialData& data, double t, std::size_t L,
                             const PropagationConfig& cfg = {}) {
	Wavefield out{t, Vector::Zero(static_cast<Eigen::Index>(medium.size())), {}};
	for (const InitialData& piece : split_initial_data(data, L))
		out.u += compressive_fields(set, medium, piece, {t}, cfg).front().x;
	return out;
}

/// Restarts the propagation at n_intervals equispaced times: u and u_t are
/// both recovered at each interval end and become the next initial data.
inline Wavefield time_split_solve(const EigenSet& set, const Medium& medium, const InitialData& data, double t,
                                  int n_intervals, const PropagationConfig& cfg = {}) {
	require(n_intervals >= 1, "time splitting needs at least one interval");
	check_data(medium, data);
	const MeasurementOperator phi(set, medium);
	const double dt = t / n_intervals;
	InitialData current = data;
	for (int i = 0; i < n_intervals; ++i) {
		const CoefficientVector c = project_initial_data(set, medium, current);
		Matrix C(phi.k(), 2);
		C.col(0) = evolve_coefficients(c, dt);
		C.col(1) = evolve_derivative(c, dt);
		const std::vector<double> eps{cfg.epsilon_rel * C.col(0).norm(), cfg.epsilon_rel * C.col(1).norm()};
		auto solved = ist_solve_batch(phi, C, cfg.recovery, eps);
		current = {std::move(solved[0].x), std::move(solved[1].x)};
	}
	return {t, std::move(current.u0), std::move(current.u1)};
}

template <EigenResolver R>
Wavefield time_split_solve(const R& resolver, const Medium& medium, const InitialData& data, double t, int n_intervals,
                           std::size_t k, std::uint64_t seed, const PropagationConfig& cfg = {}) {
	return time_split_solve(draw_eigenset(resolver, k, seed, cfg.draw), medium, data, t, n_intervals, cfg);
}

// ---------------------------------------------------------------------------
// Diagnostics.

/// sum_j sigma_j |u_j|
inline double weighted_l1(const Medium& medium, const Vector& u) {
	return medium.sigma().cwiseProduct(u).lpNorm<1>();
}

/// Running trapezoid integral of f with U(0) = 0, spacing included.
inline Vector cumulative_integral(const Grid& grid, const Vector& f) {
	Vector F(f.size());
	if (f.size() == 0)
		return F;
	const double h = grid.spacing();
	F[0] = 0.0;
	for (Eigen::Index j = 1; j < f.size(); ++j)
		F[j] = F[j - 1] + 0.5 * h * (f[j - 1] + f[j]);
	return F;
}

/// Semi-discrete energy sum m u_t^2 - u.K u (conserved exactly).
inline double energy(const WaveOperator& op, const Vector& u, const Vector& ut) {
	return op.mass().cwiseProduct(ut).dot(ut) - u.dot(op.apply_stiffness(u));
}

/// Smallest S such that all but the S largest |sigma_j u_j| sum to at most eta.
inline std::size_t essential_support(const Medium& medium, const Vector& u, double eta) {
	require(eta >= 0.0, "eta must be non-negative");
	std::vector<double> a(static_cast<std::size_t>(u.size()));
	for (Eigen::Index j = 0; j < u.size(); ++j)
		a[static_cast<std::size_t>(j)] = std::abs(medium.sigma()[j] * u[j]);
	std::sort(a.begin(), a.end());
	// a ascending: drop the smallest entries while their mass stays within eta.
	double tail = 0.0;
	std::size_t dropped = 0;
	while (dropped < a.size() && tail + a[dropped] <= eta) {
		tail += a[dropped];
		++dropped;
	}
	return a.size() - dropped;
}

} // namespace cwc
