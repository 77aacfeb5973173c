#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cwc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for invalid inputs: bad sizes, out-of-range parameters, violated
/// preconditions. Maps to CLI exit status 1.
class ParameterError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative method fails to reach its tolerance within its
/// iteration cap. Maps to CLI exit status 2.
class NumericalError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
	if (!condition)
		throw ParameterError(message);
}

enum class Boundary { periodic, dirichlet, neumann };

inline std::string_view to_string(Boundary bc) {
	switch (bc) {
	case Boundary::periodic: return "periodic";
	case Boundary::dirichlet: return "dirichlet";
	case Boundary::neumann: return "neumann";
	}
	return "unknown";
}

inline Boundary parse_boundary(std::string_view name) {
	if (name == "periodic") return Boundary::periodic;
	if (name == "dirichlet") return Boundary::dirichlet;
	if (name == "neumann") return Boundary::neumann;
	throw ParameterError("unknown boundary condition '" + std::string(name) + "'");
}

/// Skips leading "##" lines (run manifests written by the command-line tool).
inline void skip_manifest(std::istream& in) {
	std::string line;
	while (in.peek() == '#') {
		const auto pos = in.tellg();
		std::getline(in, line);
		if (line.rfind("##", 0) != 0) {
			in.seekg(pos);
			return;
		}
	}
}

inline constexpr double pi = 3.14159265358979323846;

} // namespace cwc
