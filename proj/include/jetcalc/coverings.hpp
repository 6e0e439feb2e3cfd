#pragma once

#include <string>
#include <vector>

#include "jetcalc/syslang.hpp"
#include "jetcalc/variational.hpp"

namespace jetcalc {

/// A base system enlarged by nonlocal dependent variables. The covering
/// equations follow the base equations; relations such as rho = det(dxi/dx)
/// are kept in `total.constraints`.
struct CoveringSystem {
  PdeSystem base;
  PdeSystem total;
  std::vector<int> nonlocal;  // dependent indices in total.ctx
  CoveringSpec spec;
  std::vector<Expr> law;  // potential coverings: the conservation law used

  int time_index() const;
  std::vector<int> spatial_indices() const;
};

/// Index of `t` if declared, otherwise 0.
int time_variable(const Context& ctx);

/// Sum_i D_i(T^i).
Expr divergence(const std::vector<Expr>& components);

/// Check that Sum_i D_i(T^i) vanishes on-shell.
Evidence verify_conservation_law(const std::vector<Expr>& components, const PdeSystem& system,
                                 const OracleOptions& opts = {});

/// det(dxi^i/dx^j) over the spatial variables.
Expr jacobian_determinant(const std::vector<int>& xi, const std::vector<int>& spatial, int dim);

CoveringSystem build_lagrangian_covering(const PdeSystem& base, const std::string& density,
                                         const std::vector<std::string>& velocity);

CoveringSystem build_potential_covering(const PdeSystem& base, const std::vector<Expr>& law,
                                        const std::string& law_name = "law", const OracleOptions& opts = {});

/// Forget nonlocal variables and covering equations.
PdeSystem project(const CoveringSystem& cov);

struct CoveringVerdict {
  Evidence evidence;
  Expr expression;  // before reduction
  Expr residual;    // after reduction
  Expr mass_residual;  // Lagrangian coverings: rho_t + div(rho u) reduced on the base
};

/// Lagrangian covering: D_t(J) + sum_j D_{x_j}(u_j J) reduced modulo the
/// transport equations, and the mass law of the base reduced on the base, so
/// that rho = J is preserved. Potential covering: D_t(w_x) - D_x(w_t) reduced
/// on the base.
CoveringVerdict verify_covering_consistency(const CoveringSystem& cov, const OracleOptions& opts = {});

/// Generators of xi-translations and of volume-preserving linear xi-maps.
std::vector<FiberSymmetry> label_symmetries(const CoveringSystem& cov);

/// Rebuild a covering from a file written by `cover`.
CoveringSystem covering_from_file(const SystemFile& file);
/// Serialize a covering (with its label symmetries) as a system file.
SystemFile covering_to_file(const CoveringSystem& cov);

}  // namespace jetcalc
