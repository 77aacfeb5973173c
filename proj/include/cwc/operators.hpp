#pragma once

// Discrete Laplacian L, the weighted operator Sigma^-2 L and its symmetric
// form W = S^-1 K S^-1.
//
// K is the symmetric stiffness and M = S^2 the lumped mass, so that
// apply_weighted = M^-1 K. Periodic grids use the Fourier symbol -4 pi^2 m^2;
// Dirichlet and Neumann grids use the 3-point stencil, with the Neumann end
// rows n^2 (v1 - v0) carrying half mass (the mirror ghost-node closure).

#include <cwc/grid_medium.hpp>
#include <cwc/types.hpp>

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>

namespace cwc {

enum class OperatorForm { spectral, finite_difference };

/// Fourier symbol of d^2/dx^2 on the unit circle for FFT bin b of n.
inline double laplacian_symbol(Eigen::Index b, Eigen::Index n) {
	const double m = static_cast<double>(b <= n / 2 ? b : b - n);
	return -4.0 * pi * pi * m * m;
}

namespace detail {

// Multiplies the spectrum of a real periodic vector by symbol(b).
template <class Symbol>
Vector fourier_multiply(const Vector& v, Symbol symbol) {
	thread_local Eigen::FFT<double> fft;
	const Eigen::Index n = v.size();
	Eigen::VectorXcd spec(n);
	fft.fwd(spec, v);
	for (Eigen::Index b = 0; b < n; ++b)
		spec[b] *= symbol(b);
	Eigen::VectorXcd back(n);
	fft.inv(back, spec);
	return back.real();
}

} // namespace detail

class WaveOperator {
public:
	explicit WaveOperator(Medium medium)
	    : medium_(std::move(medium)),
	      form_(medium_.grid().periodic() ? OperatorForm::spectral : OperatorForm::finite_difference),
	      quad_(medium_.grid().quadrature_weights()),
	      mass_(medium_.mass()),
	      s_(medium_.weights()) {}

	const Medium& medium() const { return medium_; }
	const Grid& grid() const { return medium_.grid(); }
	OperatorForm form() const { return form_; }
	Eigen::Index size() const { return static_cast<Eigen::Index>(medium_.size()); }

	/// Lumped mass diagonal sigma^2 times the quadrature weight.
	const Vector& mass() const { return mass_; }
	/// Square root of the mass diagonal.
	const Vector& weights() const { return s_; }

	/// Symmetric stiffness K.
	Vector apply_stiffness(const Vector& v) const {
		check(v);
		if (form_ == OperatorForm::spectral) {
			const Eigen::Index n = v.size();
			return detail::fourier_multiply(v, [n](Eigen::Index b) { return laplacian_symbol(b, n); });
		}
		const Eigen::Index m = v.size();
		const double n2 = static_cast<double>(grid().n()) * static_cast<double>(grid().n());
		Vector out(m);
		if (grid().bc() == Boundary::dirichlet) {
			for (Eigen::Index j = 0; j < m; ++j) {
				const double left = j > 0 ? v[j - 1] : 0.0;
				const double right = j + 1 < m ? v[j + 1] : 0.0;
				out[j] = n2 * (left - 2.0 * v[j] + right);
			}
		} else {
			out[0] = n2 * (v[1] - v[0]);
			for (Eigen::Index j = 1; j + 1 < m; ++j)
				out[j] = n2 * (v[j - 1] - 2.0 * v[j] + v[j + 1]);
			out[m - 1] = n2 * (v[m - 2] - v[m - 1]);
		}
		return out;
	}

	/// Second-derivative approximation L v.
	Vector apply_laplacian(const Vector& v) const {
		return (apply_stiffness(v).array() / quad_.array()).matrix();
	}

	/// Sigma^-2 L v.
	Vector apply_weighted(const Vector& v) const {
		return (apply_stiffness(v).array() / mass_.array()).matrix();
	}

	/// W x = S^-1 K S^-1 x.
	Vector apply_symmetrized(const Vector& x) const {
		check(x);
		const Vector y = (x.array() / s_.array()).matrix();
		return (apply_stiffness(y).array() / s_.array()).matrix();
	}

	Matrix apply_symmetrized(const Matrix& X) const {
		Matrix Y(X.rows(), X.cols());
		for (Eigen::Index c = 0; c < X.cols(); ++c)
			Y.col(c) = apply_symmetrized(Vector(X.col(c)));
		return Y;
	}

	struct DenseForm {
		Matrix W;
		double asymmetry = 0.0; // max |W - W^T| / max |W| before symmetrization
	};

	/// W assembled column by column from canonical basis vectors, then
	/// symmetrized as (W + W^T)/2.
	DenseForm assemble_dense_symmetrized() const {
		require(size() <= 8192, "dense assembly limited to 8192 unknowns");
		const Eigen::Index m = size();
		DenseForm out;
		out.W.resize(m, m);
		Vector e = Vector::Zero(m);
		for (Eigen::Index c = 0; c < m; ++c) {
			e[c] = 1.0;
			out.W.col(c) = apply_symmetrized(e);
			e[c] = 0.0;
		}
		const double scale = out.W.cwiseAbs().maxCoeff();
		out.asymmetry = scale > 0.0 ? (out.W - out.W.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
		out.W = 0.5 * (out.W + out.W.transpose()).eval();
		return out;
	}

private:
	void check(const Vector& v) const {
		require(v.size() == size(), "operator: vector length does not match grid");
	}

	Medium medium_;
	OperatorForm form_;
	Vector quad_;
	Vector mass_;
	Vector s_;
};

/// Sigma^2-weighted inner product sum_j m_j a_j b_j with the lumped mass m.
inline double weighted_dot(const WaveOperator& op, const Vector& a, const Vector& b) {
	return (op.mass().array() * a.array() * b.array()).sum();
}

} // namespace cwc
