#pragma once

// Weighted l1 recovery from partial eigen-coefficients.
//
// Phi u = V^T u with the eigenvectors of the set as columns of V, so that
// Phi M u are the coefficients of u in the set (M the lumped mass) and
// Phi* c = V c. Iterative soft thresholding on
//
//     1/2 ||Phi M u - c||^2 + lambda sum_j s_j |u_j|
//
// with s the symmetrizing weights (s = sigma except at Neumann end nodes).

#include <cwc/eigensolver.hpp>
#include <cwc/grid_medium.hpp>
#include <cwc/types.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

namespace cwc {

class MeasurementOperator {
public:
	MeasurementOperator(const EigenSet& set, const Medium& medium)
	    : V_(set.vectors()), mass_(medium.mass()), s_(medium.weights()) {
		require(static_cast<std::size_t>(V_.rows()) == medium.size(), "measurement operator: eigenset does not match medium");
	}

	Eigen::Index k() const { return V_.cols(); }
	Eigen::Index n() const { return V_.rows(); }
	const Matrix& basis() const { return V_; }
	const Vector& mass() const { return mass_; }
	const Vector& weights() const { return s_; }

	/// c[w] = sum_j x[j] v_w[j]
	Vector apply(const Vector& x) const {
		require(x.size() == n(), "phi: length mismatch");
		return V_.transpose() * x;
	}

	/// x[j] = sum_w c[w] v_w[j]
	Vector adjoint(const Vector& c) const {
		require(c.size() == k(), "phi*: length mismatch");
		return V_ * c;
	}

	/// Coefficients of u in the set: Phi M u.
	Vector coefficients(const Vector& u) const { return apply(mass_.cwiseProduct(u)); }
	Matrix coefficients(const Matrix& U) const { return V_.transpose() * (mass_.asDiagonal() * U); }

private:
	Matrix V_;
	Vector mass_;
	Vector s_;
};

inline Vector phi_apply(const MeasurementOperator& m, const Vector& x) { return m.apply(x); }
inline Vector phi_adjoint(const MeasurementOperator& m, const Vector& c) { return m.adjoint(c); }

inline double soft_threshold(double alpha, double lambda) {
	require(lambda >= 0.0, "soft threshold: lambda must be non-negative");
	if (std::abs(alpha) < lambda)
		return 0.0;
	return alpha > 0.0 ? alpha - lambda : alpha + lambda;
}

struct RecoveryConfig {
	double epsilon = 0.0;       // constraint radius on ||Phi M u - c||
	double lambda0 = 0.0;       // 0: 0.1 max_j |(Phi* c)_j| / sigma_j
	double tol = 1e-6;          // stop when ||du|| <= tol max(1, ||u||)
	int max_iter = 5000;
	double stage_tol = 1e-6;    // lambda is adjusted once ||du|| <= stage_tol ||u||
	double coarse_stage_tol = 0.0; // if larger, used instead while the residual exceeds 2 epsilon
	int stage_cap = 50;         // with epsilon = 0, halve lambda at least this often
	bool update_multiplier = true;
	std::ostream* trace = nullptr; // per-iteration CSV (single right-hand side only)

	void validate() const {
		require(tol > 0.0, "recovery: tol must be positive");
		require(max_iter >= 1, "recovery: max_iter must be >= 1");
		require(epsilon >= 0.0, "recovery: epsilon must be non-negative");
		require(lambda0 >= 0.0, "recovery: lambda0 must be non-negative");
		require(stage_tol > 0.0 && stage_cap >= 1, "recovery: bad continuation settings");
	}
};

struct RecoveryResult {
	Vector x;
	int iterations = 0;
	double final_residual = 0.0;
	double final_lambda = 0.0;
	bool converged = false;
};

namespace detail {

struct IstColumn {
	double lambda = 0.0;
	double lambda0 = 0.0;
	double epsilon = 0.0;
	double residual = 0.0;
	int iterations = 0;
	int since_update = 0;
	bool done = false;
	bool converged = false;
};

inline double default_lambda0(const MeasurementOperator& m, const Vector& c) {
	const Vector back = m.adjoint(c);
	return 0.1 * (back.array() / m.weights().array()).abs().maxCoeff();
}

} // namespace detail

/// Soft thresholding for several right-hand sides in lockstep (columns of C).
/// Each column keeps its own multiplier and stopping state; epsilons holds
/// one constraint radius per column (or is empty to use cfg.epsilon).
///
/// Continuation: lambda is held until the iterate settles, then scaled by
/// eps/res clamped to [1/2, 2] (res measured after thresholding). Far from
/// the constraint the iterate only needs to settle loosely. With eps = 0
/// lambda is halved instead, and also after stage_cap sweeps.
inline std::vector<RecoveryResult> ist_solve_batch(const MeasurementOperator& m, const Matrix& C, const RecoveryConfig& cfg,
                                                   const std::vector<double>& epsilons = {},
                                                   const Matrix* start = nullptr) {
	cfg.validate();
	require(C.rows() == m.k(), "ist: coefficient length does not match eigenset");
	require(epsilons.empty() || epsilons.size() == static_cast<std::size_t>(C.cols()), "ist: one epsilon per column");
	const Eigen::Index n = m.n(), B = C.cols();
	const Vector inv_s = m.weights().cwiseInverse();

	require(!start || (start->rows() == n && start->cols() == B), "ist: warm start has the wrong shape");
	Matrix U = start ? *start : Matrix::Zero(n, B);
	std::vector<detail::IstColumn> state(static_cast<std::size_t>(B));
	for (Eigen::Index b = 0; b < B; ++b) {
		auto& st = state[static_cast<std::size_t>(b)];
		st.epsilon = epsilons.empty() ? cfg.epsilon : epsilons[static_cast<std::size_t>(b)];
		st.lambda0 = cfg.lambda0 > 0.0 ? cfg.lambda0 : detail::default_lambda0(m, C.col(b));
		st.lambda = st.lambda0;
		st.residual = C.col(b).norm();
		if (C.col(b).norm() == 0.0 && U.col(b).norm() == 0.0) {
			st.done = st.converged = true;
			st.iterations = 1;
		}
	}
	if (cfg.trace)
		*cfg.trace << "iteration,lambda,residual,change,l1\n";

	std::vector<Eigen::Index> active;
	for (Eigen::Index b = 0; b < B; ++b)
		if (!state[static_cast<std::size_t>(b)].done)
			active.push_back(b);

	Matrix Ua, Ca, AUa;
	auto gather = [&] {
		const auto na = static_cast<Eigen::Index>(active.size());
		Ua.resize(n, na);
		Ca.resize(m.k(), na);
		for (Eigen::Index a = 0; a < na; ++a) {
			Ua.col(a) = U.col(active[static_cast<std::size_t>(a)]);
			Ca.col(a) = C.col(active[static_cast<std::size_t>(a)]);
		}
		AUa = m.coefficients(Ua);
	};
	gather();

	for (int it = 1; it <= cfg.max_iter && !active.empty(); ++it) {
		const auto na = static_cast<Eigen::Index>(active.size());
		Matrix Z = Ua + m.basis() * (Ca - AUa);
		for (Eigen::Index a = 0; a < na; ++a) {
			const double lambda = state[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])].lambda;
			for (Eigen::Index j = 0; j < n; ++j) {
				const double t = lambda * inv_s[j];
				const double z = Z(j, a);
				Z(j, a) = std::abs(z) < t ? 0.0 : (z > 0.0 ? z - t : z + t);
			}
		}
		const Matrix AZ = m.coefficients(Z);

		bool shrink = false;
		for (Eigen::Index a = 0; a < na; ++a) {
			const Eigen::Index b = active[static_cast<std::size_t>(a)];
			auto& st = state[static_cast<std::size_t>(b)];
			const double change = (Z.col(a) - Ua.col(a)).norm();
			const double size = Z.col(a).norm();
			st.residual = (AZ.col(a) - Ca.col(a)).norm();
			st.iterations = it;
			++st.since_update;
			if (cfg.trace && B == 1)
				*cfg.trace << it << ',' << st.lambda << ',' << st.residual << ',' << change << ','
				           << (m.weights().cwiseProduct(Z.col(a))).lpNorm<1>() << '\n';

			const bool feasible = st.residual <= 1.05 * st.epsilon || st.lambda <= 1e-12 * st.lambda0;
			if (change <= cfg.tol * std::max(1.0, size) && (feasible || !cfg.update_multiplier)) {
				st.done = st.converged = true;
				shrink = true;
			} else if (cfg.update_multiplier && st.lambda > 1e-12 * st.lambda0) {
				const bool far = st.residual > 2.0 * st.epsilon;
				const double stage = far ? std::max(cfg.stage_tol, cfg.coarse_stage_tol) : cfg.stage_tol;
				const bool settled = change <= stage * size && st.residual > 0.0;
				if (st.epsilon > 0.0 && settled) {
					st.lambda *= std::clamp(st.epsilon / st.residual, 0.5, 2.0);
					st.since_update = 0;
				} else if (st.epsilon == 0.0 && (settled || st.since_update >= cfg.stage_cap)) {
					st.lambda *= 0.5;
					st.since_update = 0;
				}
			}
			U.col(b) = Z.col(a);
		}
		Ua = std::move(Z);
		AUa = AZ;
		if (shrink) {
			std::erase_if(active, [&](Eigen::Index b) { return state[static_cast<std::size_t>(b)].done; });
			gather();
		}
	}

	std::vector<RecoveryResult> out(static_cast<std::size_t>(B));
	for (Eigen::Index b = 0; b < B; ++b) {
		const auto& st = state[static_cast<std::size_t>(b)];
		auto& r = out[static_cast<std::size_t>(b)];
		r.x = U.col(b);
		r.iterations = st.iterations;
		r.final_residual = st.residual;
		r.final_lambda = st.lambda;
		r.converged = st.converged;
	}
	return out;
}

inline RecoveryResult ist_solve(const MeasurementOperator& m, const Vector& c_target, const RecoveryConfig& cfg,
                                const Vector* start = nullptr) {
	Matrix C(c_target.size(), 1);
	C.col(0) = c_target;
	if (!start)
		return std::move(ist_solve_batch(m, C, cfg).front());
	Matrix U0(start->size(), 1);
	U0.col(0) = *start;
	return std::move(ist_solve_batch(m, C, cfg, {}, &U0).front());
}

/// 1/2 ||Phi M u - c||^2 + lambda sum_j s_j |u_j|
inline double lagrangian_objective(const MeasurementOperator& m, const Vector& u, const Vector& c, double lambda) {
	return 0.5 * (m.coefficients(u) - c).squaredNorm() + lambda * m.weights().cwiseProduct(u).lpNorm<1>();
}

} // namespace cwc
