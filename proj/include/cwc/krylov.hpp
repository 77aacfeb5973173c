#pragma once

// Matrix-free MINRES for symmetric indefinite systems, built on Eigen's
// MINRES recurrence.

#include <cwc/operators.hpp>
#include <cwc/types.hpp>

#include <unsupported/Eigen/IterativeSolvers>

#include <algorithm>
#include <cmath>

namespace cwc {

/// (W + shift2 I) as a matrix-free operand for the MINRES recurrence.
struct ShiftedSymmetrized {
	const WaveOperator* op;
	double shift2;

	Eigen::Index cols() const { return op->size(); }
	Eigen::Index rows() const { return op->size(); }
	Vector operator*(const Vector& x) const { return op->apply_symmetrized(x) + shift2 * x; }
};

struct IdentityPreconditioner {
	Vector solve(const Vector& r) const { return r; }
};

/// |K0 + shift2 M0|^-1 for the constant-impedance periodic operator with
/// impedance sigma_ref, floored at half the local mode spacing so that the
/// preconditioner stays positive definite near resonance.
class ConstantMediumPreconditioner {
public:
	ConstantMediumPreconditioner(Eigen::Index n, double sigma_ref, double shift2) : inv_(n) {
		const double dk = 2.0 * pi / sigma_ref; // constant-medium frequency spacing
		const double m_shift = std::sqrt(std::max(shift2, 0.0)) / dk;
		const double floor = 0.5 * dk * dk * (2.0 * m_shift + 1.0);
		for (Eigen::Index b = 0; b < n; ++b) {
			const double d = std::abs(laplacian_symbol(b, n) / (sigma_ref * sigma_ref) + shift2);
			inv_[b] = 1.0 / std::max(d, floor);
		}
	}

	Vector solve(const Vector& r) const {
		return detail::fourier_multiply(r, [this](Eigen::Index b) { return inv_[b]; });
	}

private:
	Vector inv_;
};

struct MinresResult {
	Vector x;
	Eigen::Index iterations = 0;
	double relative_residual = 0.0;
	bool finite = true;
};

template <class Preconditioner>
MinresResult minres(const ShiftedSymmetrized& A, const Vector& b, const Preconditioner& precond, double tol,
                    Eigen::Index max_iter) {
	MinresResult out;
	out.x = Vector::Zero(b.size());
	out.iterations = max_iter;
	double err = tol;
	Eigen::internal::minres(A, b, out.x, precond, out.iterations, err);
	out.relative_residual = err;
	out.finite = out.x.allFinite();
	return out;
}

} // namespace cwc
