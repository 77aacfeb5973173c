#pragma once

// Snapshot reverse-time migration.
//
// Data (d1, d2) = (u, u_t) at time T in the perturbed medium sigma^2 =
// sigma0^2 + r. The adjoint field q solves the background wave equation
// backwards from q(T) = d2 / sigma0^2, q_t(T) = -d1 / sigma0^2, and the image
// is -int_0^T q u_inc,tt dt, evaluated on a snapshot grid where every snapshot
// is an independent (possibly compressive) solve.

#include <cwc/eigensolver.hpp>
#include <cwc/grid_medium.hpp>
#include <cwc/propagation.hpp>
#include <cwc/recovery.hpp>
#include <cwc/rng.hpp>
#include <cwc/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace cwc {

struct SnapshotData {
	Vector d1; // u(T)
	Vector d2; // u_t(T)
};

/// sqrt(sigma0^2 + r); throws unless the sum is positive everywhere.
inline Medium perturbed_medium(const Medium& background, const Vector& r) {
	require(r.size() == background.sigma().size(), "reflectivity length does not match grid");
	const Vector s2 = background.sigma().array().square() + r.array();
	require(s2.minCoeff() > 0.0, "perturbed medium must have sigma0^2 + r > 0");
	return Medium(background.grid(), s2.cwiseSqrt());
}

/// Full-basis solve in the perturbed medium from (source, 0).
inline SnapshotData synthesize_data(const Medium& background, const Vector& r, const Vector& source, double T) {
	const Medium med = perturbed_medium(background, r);
	const auto n = static_cast<Eigen::Index>(med.size());
	const Wavefield w = reference_solution(med, {source, Vector::Zero(n)}, T);
	return {w.u, w.ut};
}

/// Zero inside a window of the given half-width (in cells) around center, one elsewhere.
inline Vector mute_window(const Grid& grid, Eigen::Index center, int halfwidth) {
	const auto n = static_cast<Eigen::Index>(grid.size());
	Vector mask = Vector::Ones(n);
	if (halfwidth <= 0)
		return mask;
	for (Eigen::Index j = 0; j < n; ++j) {
		Eigen::Index d = std::abs(j - center);
		if (grid.periodic())
			d = std::min(d, n - d);
		if (d <= halfwidth)
			mask[j] = 0.0;
	}
	return mask;
}

inline std::pair<Vector, Vector> adjoint_final_conditions(const Vector& d1, const Vector& d2, const Vector& sigma0_sq) {
	require(d1.size() == d2.size() && d1.size() == sigma0_sq.size(), "adjoint final conditions: length mismatch");
	return {d2.cwiseQuotient(sigma0_sq), -d1.cwiseQuotient(sigma0_sq)};
}

/// Coefficients of the final-value problem; evolve_coefficients(c, t - T) gives q(t).
inline CoefficientVector final_value_coefficients(const EigenSet& set, const Medium& background, const Vector& qT,
                                                  const Vector& qtT) {
	return project_initial_data(set, background, {qT, qtT});
}

inline Wavefield evolve_final_value(const ReferencePropagator& ref0, const Vector& qT, const Vector& qtT, double T,
                                    double t) {
	require(t <= T, "final-value problem is solved for t <= T");
	Wavefield w = ref0.solve({qT, qtT}, t - T);
	w.t = t;
	return w;
}

/// Compressive q(t) for every t, one batch.
inline std::vector<RecoveryResult> evolve_final_value(const EigenSet& set, const Medium& background, const Vector& qT,
                                                      const Vector& qtT, double T, const std::vector<double>& times,
                                                      const PropagationConfig& cfg = {}) {
	std::vector<double> shifted(times.size());
	for (std::size_t i = 0; i < times.size(); ++i) {
		require(times[i] <= T, "final-value problem is solved for t <= T");
		shifted[i] = times[i] - T;
	}
	return compressive_fields(set, background, {qT, qtT}, shifted, cfg);
}

inline bool same_medium(const Medium& a, const Medium& b) {
	return a.grid() == b.grid() && (a.sigma() - b.sigma()).cwiseAbs().maxCoeff() <= 1e-12 * a.sigma_max();
}

struct RtmConfig {
	std::size_t n = 1024;
	int gamma = 1;
	double contrast_sq = 1.4; // (sigma0_max / sigma0_min)^2
	std::vector<double> reflector_centers{0.55, 0.7};
	std::vector<double> reflector_amplitudes{-0.6, 0.6};
	double width_cells = 7.0; // std of reflectors and source, in cells
	double source_center = 0.3;
	int mute_halfwidth = 40; // cells around the direct arrival at T; 0 keeps everything
	int n_t = 0;             // 0: n / 10
	double final_time = 0.0; // 0: crossing time of the background
};

struct RtmProblem {
	Medium background;
	Vector r;
	Vector source; // u(0); u_t(0) = 0
	double T = 0.0;
	int n_t = 0;
	SnapshotData data; // muted
	Vector mute;       // 1 where data is kept

	Vector sigma0_sq() const { return background.sigma().array().square(); }
	std::size_t size() const { return background.size(); }
};

/// Mutes the data around the largest |u_inc(T)|, where the direct waves sit.
inline Vector direct_arrival_mute(const ReferencePropagator& ref0, const Vector& source, double T, int halfwidth) {
	const auto n = static_cast<Eigen::Index>(ref0.medium().size());
	const Wavefield inc = ref0.solve({source, Vector::Zero(n)}, T);
	Eigen::Index center = 0;
	inc.u.cwiseAbs().maxCoeff(&center);
	return mute_window(ref0.medium().grid(), center, halfwidth);
}

inline RtmProblem make_rtm_problem(const Medium& background, const Vector& r, const Vector& source, double T, int n_t,
                                   const Vector& mute) {
	require(n_t >= 3, "migration needs at least 3 snapshots");
	require(T > 0.0, "final time must be positive");
	require(source.size() == r.size() && mute.size() == r.size(), "rtm problem: length mismatch");
	SnapshotData d = synthesize_data(background, r, source, T);
	d.d1 = d.d1.cwiseProduct(mute);
	d.d2 = d.d2.cwiseProduct(mute);
	return {background, r, source, T, n_t, std::move(d), mute};
}

/// The standard two-reflector experiment on a periodic grid.
inline RtmProblem make_rtm_problem(const RtmConfig& cfg, const ReferencePropagator* ref0 = nullptr) {
	require(cfg.reflector_centers.size() == cfg.reflector_amplitudes.size(), "one amplitude per reflector");
	const Grid grid(cfg.n, Boundary::periodic);
	const Medium background = make_smooth_medium(cfg.gamma, sigma_max_for_ratio(std::sqrt(cfg.contrast_sq)), grid);
	const double std = cfg.width_cells / static_cast<double>(cfg.n);
	Vector r = Vector::Zero(static_cast<Eigen::Index>(grid.size()));
	for (std::size_t i = 0; i < cfg.reflector_centers.size(); ++i)
		r += cfg.reflector_amplitudes[i] * gaussian_bump(grid, cfg.reflector_centers[i], std);
	const Vector source = ricker_bump(grid, cfg.source_center, std);
	const double T = cfg.final_time > 0.0 ? cfg.final_time : background.crossing_time();
	const int n_t = cfg.n_t > 0 ? cfg.n_t : static_cast<int>(cfg.n / 10);
	const ReferencePropagator own = ref0 ? ReferencePropagator(*ref0) : ReferencePropagator(background);
	require(same_medium(own.medium(), background), "reference propagator is for another medium");
	return make_rtm_problem(background, r, source, T, n_t, direct_arrival_mute(own, source, T, cfg.mute_halfwidth));
}

/// n_t equispaced snapshot times from 0 to T inclusive.
inline std::vector<double> snapshot_times(double T, int n_t) {
	require(n_t >= 2 && T > 0.0, "snapshot grid needs n_t >= 2 and T > 0");
	std::vector<double> t(static_cast<std::size_t>(n_t));
	for (int i = 0; i < n_t; ++i)
		t[static_cast<std::size_t>(i)] = T * i / (n_t - 1);
	t.back() = T;
	return t;
}

/// Second time derivative of snapshots (columns), spacing dt. Central
/// differences inside, one-sided second-order (2, -5, 4, -1) at both ends.
inline Matrix second_time_derivative(const Matrix& U, double dt) {
	const Eigen::Index m = U.cols();
	require(m >= 4, "second derivative needs at least 4 snapshots");
	const double s = 1.0 / (dt * dt);
	Matrix D(U.rows(), m);
	for (Eigen::Index i = 1; i + 1 < m; ++i)
		D.col(i) = s * (U.col(i + 1) - 2.0 * U.col(i) + U.col(i - 1));
	D.col(0) = s * (2.0 * U.col(0) - 5.0 * U.col(1) + 4.0 * U.col(2) - U.col(3));
	D.col(m - 1) = s * (2.0 * U.col(m - 1) - 5.0 * U.col(m - 2) + 4.0 * U.col(m - 3) - U.col(m - 4));
	return D;
}

struct MigrationImage {
	Vector r_tilde;
	std::size_t k = 0;
	std::uint64_t seed = 0;
	int unconverged = 0;
};

namespace detail {

inline Vector imaging_sum(const Matrix& Q, const Matrix& U, double dt) {
	const Matrix Utt = second_time_derivative(U, dt);
	return -(Q.cwiseProduct(Utt)).rowwise().sum() / static_cast<double>(Q.cols());
}

} // namespace detail

/// Image with the complete basis: snapshots synthesized directly.
inline MigrationImage migrate_reference(const RtmProblem& p, const ReferencePropagator& ref0) {
	require(same_medium(ref0.medium(), p.background), "reference propagator is for another medium");
	const auto [qT, qtT] = adjoint_final_conditions(p.data.d1, p.data.d2, p.sigma0_sq());
	const std::vector<double> times = snapshot_times(p.T, p.n_t);
	std::vector<double> back(times.size());
	for (std::size_t i = 0; i < times.size(); ++i)
		back[i] = times[i] - p.T;
	const auto n = static_cast<Eigen::Index>(p.size());
	const Matrix U = ref0.fields({p.source, Vector::Zero(n)}, times);
	const Matrix Q = ref0.fields({qT, qtT}, back);
	return {detail::imaging_sum(Q, U, times[1] - times[0]), p.size(), 0, 0};
}

/// Image from one eigenset: every snapshot of u_inc and q recovered by l1.
inline MigrationImage migrate(const RtmProblem& p, const EigenSet& set, const PropagationConfig& cfg = {}) {
	const auto [qT, qtT] = adjoint_final_conditions(p.data.d1, p.data.d2, p.sigma0_sq());
	const std::vector<double> times = snapshot_times(p.T, p.n_t);
	const auto n = static_cast<Eigen::Index>(p.size());
	const auto us = compressive_fields(set, p.background, {p.source, Vector::Zero(n)}, times, cfg);
	const auto qs = evolve_final_value(set, p.background, qT, qtT, p.T, times, cfg);
	Matrix U(n, static_cast<Eigen::Index>(times.size())), Q(n, static_cast<Eigen::Index>(times.size()));
	MigrationImage out;
	for (std::size_t i = 0; i < times.size(); ++i) {
		U.col(static_cast<Eigen::Index>(i)) = us[i].x;
		Q.col(static_cast<Eigen::Index>(i)) = qs[i].x;
		out.unconverged += (us[i].converged ? 0 : 1) + (qs[i].converged ? 0 : 1);
	}
	out.r_tilde = detail::imaging_sum(Q, U, times[1] - times[0]);
	out.k = set.k();
	out.seed = set.seed;
	return out;
}

template <EigenResolver R>
MigrationImage migrate(const RtmProblem& p, const R& resolver, std::size_t k, std::uint64_t seed,
                       const PropagationConfig& cfg = {}) {
	require(k >= 1 && k <= p.size(), "eigenset size k must lie in [1, n]");
	return migrate(p, draw_eigenset(resolver, k, seed, cfg.draw), cfg);
}

/// Err^2 = sum_sets |r0 - r|^2 / (N |sets| ||r0||), plus the plain relative error.
template <EigenResolver R>
ErrorStatistic rtm_error(const RtmProblem& p, const R& resolver, const Vector& reference_image, double k_over_n,
                         std::size_t trials, std::uint64_t seed = 0, const PropagationConfig& cfg = {}) {
	require(trials >= 1, "rtm error needs at least one trial");
	const double rnorm = reference_image.norm();
	require(rnorm > 0.0, "reference image vanishes");
	const double N = static_cast<double>(p.size());
	ErrorStatistic out;
	out.k = k_from_fraction(k_over_n, p.size());
	double total = 0.0;
	for (std::size_t s = 0; s < trials; ++s) {
		const std::uint64_t set_seed = derive_seed(seed, "rtm-set", s);
		const MigrationImage img = migrate(p, resolver, out.k, set_seed, cfg);
		const double sq = (img.r_tilde - reference_image).squaredNorm();
		total += sq;
		out.unconverged += img.unconverged;
		out.seeds.push_back(set_seed);
		out.set_err.push_back(std::sqrt(sq / (N * rnorm)));
		out.set_relative.push_back(std::sqrt(sq) / rnorm);
	}
	const double sets = static_cast<double>(trials);
	out.err = std::sqrt(total / (N * sets * rnorm));
	out.relative = std::sqrt(total / sets) / rnorm;
	return out;
}

// ---------------------------------------------------------------------------
// Linearized modeling and its adjoint.

namespace detail {

inline double sinc(double x) {
	return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
}

} // namespace detail

/// Born data (u(T), u_t(T)) of sigma0^2 u_tt - u_xx = -r u_inc,tt with zero
/// initial state, u_inc started from (source, 0). The time integrals of the
/// modal Duhamel formula are evaluated in closed form.
inline SnapshotData linearized_forward(const ReferencePropagator& ref0, const Vector& source, const Vector& r, double T) {
	const Medium& med = ref0.medium();
	require(r.size() == source.size() && r.size() == static_cast<Eigen::Index>(med.size()), "linearized forward: length mismatch");
	const Matrix V = ref0.basis().vectors();
	const Vector w = ref0.basis().omegas();
	const Vector c0 = V.transpose() * med.mass().cwiseProduct(source);
	const Vector wr = r.cwiseProduct(med.grid().quadrature_weights());
	const Matrix G = V.transpose() * wr.asDiagonal() * V;
	const Vector f = w.array().square() * c0.array(); // forcing amplitude per source mode
	const Eigen::Index m = w.size();
	const double h = 0.5 * T;
	Vector a = Vector::Zero(m), at = Vector::Zero(m);
	for (Eigen::Index i = 0; i < m; ++i) {
		double sa = 0.0, st = 0.0;
		for (Eigen::Index j = 0; j < m; ++j) {
			if (f[j] == 0.0)
				continue;
			const double p = (w[i] + w[j]) * h, q = (w[i] - w[j]) * h;
			// int_0^T sin(w_i (T-s))/w_i cos(w_j s) ds and int_0^T cos(w_i (T-s)) cos(w_j s) ds
			const double P = 0.5 * T * T * detail::sinc(p) * detail::sinc(q);
			const double C = h * (std::cos(q) * detail::sinc(p) + std::cos(p) * detail::sinc(q));
			const double g = G(i, j) * f[j];
			sa += P * g;
			st += C * g;
		}
		a[i] = sa;
		at[i] = st;
	}
	return {V * a, V * at};
}

/// -int_0^T q u_inc,tt dt by the trapezoid rule on n_q intervals, both
/// fields synthesized exactly from the complete basis.
inline Vector imaging_operator(const ReferencePropagator& ref0, const Vector& source, const SnapshotData& d, double T,
                               int n_q) {
	require(n_q >= 1, "imaging quadrature needs n_q >= 1");
	const Medium& med = ref0.medium();
	const Vector wq = med.grid().quadrature_weights();
	const Matrix V = ref0.basis().vectors();
	const Vector w = ref0.basis().omegas();
	const Vector c0 = V.transpose() * med.mass().cwiseProduct(source);
	// q(T) = d2 / sigma0^2, q_t(T) = -d1 / sigma0^2, so M q(T) = W d2.
	const CoefficientVector qc{w, V.transpose() * wq.cwiseProduct(d.d2), -(V.transpose() * wq.cwiseProduct(d.d1))};
	const Eigen::Index m = w.size();
	Matrix A(m, n_q + 1), B(m, n_q + 1);
	for (int i = 0; i <= n_q; ++i) {
		const double t = T * i / n_q;
		const double weight = (i == 0 || i == n_q) ? 0.5 : 1.0;
		A.col(i) = evolve_coefficients(qc, t - T);
		for (Eigen::Index j = 0; j < m; ++j)
			B(j, i) = -weight * w[j] * w[j] * std::cos(w[j] * t) * c0[j];
	}
	const Matrix Q = V * A, Utt = V * B;
	return -(T / n_q) * Q.cwiseProduct(Utt).rowwise().sum();
}

struct AdjointReport {
	double forward = 0.0; // <F r, d>
	double adjoint = 0.0; // <r, F* d>
	double discrepancy = 0.0;
};

/// Sum of a few random gaussians of width about 1/20: smooth test functions.
inline Vector random_smooth_field(const Grid& grid, Rng& rng, int bumps = 6) {
	Vector v = Vector::Zero(static_cast<Eigen::Index>(grid.size()));
	for (int b = 0; b < bumps; ++b)
		v += uniform(rng, -1.0, 1.0) * gaussian_bump(grid, uniform01(rng), uniform(rng, 0.03, 0.08));
	return v;
}

inline AdjointReport adjoint_check(const ReferencePropagator& ref0, const Vector& source, double T, const Vector& r,
                                   const SnapshotData& d, int n_q) {
	const Vector wq = ref0.medium().grid().quadrature_weights();
	const SnapshotData Fr = linearized_forward(ref0, source, r, T);
	const Vector Fd = imaging_operator(ref0, source, d, T, n_q);
	AdjointReport out;
	out.forward = wq.cwiseProduct(d.d1).dot(Fr.d1) + wq.cwiseProduct(d.d2).dot(Fr.d2);
	out.adjoint = wq.cwiseProduct(r).dot(Fd);
	const double scale = std::max(std::abs(out.forward), std::abs(out.adjoint));
	out.discrepancy = scale > 0.0 ? std::abs(out.forward - out.adjoint) / scale : 0.0;
	return out;
}

/// Dot-product test on random smooth r and d.
inline AdjointReport adjoint_test(const ReferencePropagator& ref0, const Vector& source, double T, int n_q,
                                  std::uint64_t seed = 0) {
	auto rng = make_rng(seed, "adjoint-test");
	const Grid& g = ref0.medium().grid();
	const Vector r = random_smooth_field(g, rng);
	SnapshotData d;
	d.d1 = random_smooth_field(g, rng);
	d.d2 = random_smooth_field(g, rng);
	return adjoint_check(ref0, source, T, r, d, n_q);
}

} // namespace cwc
