#pragma once

#include <span>
#include <string>
#include <vector>

#include "phasemetric/symcalc.hpp"

namespace phasemetric {

struct OperatorSpec {
  std::string name;
  std::vector<std::string> variables;              // base variable names
  std::vector<std::vector<std::string>> fields;    // coefficient strings per field
  SymbolMode mode = SymbolMode::Bracket;
  int m = 1;
};

/// L = sum X_j^2 with its symbols, effective symbol and compiled Hamiltonian
/// fields. Immutable after construction.
class Operator {
 public:
  Operator() = default;
  explicit Operator(OperatorSpec spec) : spec_(std::move(spec)) {
    d_ = static_cast<int>(spec_.variables.size());
    if (d_ < 1) throw Error(ErrorCode::InvalidArgument, "operator needs at least one variable");
    if (2 * d_ > kMaxVars) throw Error(ErrorCode::InvalidArgument, "dimension too large");
    if (spec_.fields.empty()) throw Error(ErrorCode::InvalidArgument, "operator needs at least one field");
    for (const auto& f : spec_.fields) fields_.push_back(BaseVectorField::parse(f, spec_.variables));
    for (const auto& f : fields_) symbols_.push_back(principal_symbol(f));
    es_ = make_effective_symbol(symbols_, spec_.m, spec_.mode);
    for (const auto& s : symbols_) {
      sym_compiled_.emplace_back(s.expr());
      auto H = hamiltonian_field(s);
      std::vector<CompiledExpr> hc;
      for (const auto& c : H.comps) hc.emplace_back(c);
      ham_compiled_.push_back(std::move(hc));
    }
    for (const auto& f : fields_) {
      std::vector<CompiledExpr> bc;
      for (const auto& c : f.coeffs) bc.emplace_back(c);
      base_compiled_.push_back(std::move(bc));
    }
  }

  const OperatorSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  int dim() const { return d_; }
  int nfields() const { return static_cast<int>(fields_.size()); }
  const std::vector<std::string>& variables() const { return spec_.variables; }
  std::vector<std::string> phase_variable_names() const { return phase_names(spec_.variables); }
  const std::vector<BaseVectorField>& fields() const { return fields_; }
  const std::vector<PhaseSymbol>& symbols() const { return symbols_; }
  const EffectiveSymbol& effective_symbol() const { return es_; }

  double sigma_tilde(std::span<const double> p) const { return es_(p); }
  double symbol(int j, std::span<const double> p) const { return sym_compiled_[static_cast<std::size_t>(j)](p); }

  /// H_{sigma_j} at p, written into out (size 2d).
  void hamiltonian(int j, std::span<const double> p, std::span<double> out) const {
    const auto& hc = ham_compiled_[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < hc.size(); ++i) out[i] = hc[i].is_zero() ? 0.0 : hc[i](p);
  }

  /// X_j at a base point x, written into out (size d).
  void base_field(int j, std::span<const double> x, std::span<double> out) const {
    const auto& bc = base_compiled_[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < bc.size(); ++i) out[i] = bc[i].is_zero() ? 0.0 : bc[i](x);
  }

  /// Whether H_{sigma_j} has an identically zero component along phase coordinate i.
  bool hamiltonian_component_zero(int j, int i) const {
    return ham_compiled_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)].is_zero();
  }

 private:
  OperatorSpec spec_;
  int d_ = 0;
  std::vector<BaseVectorField> fields_;
  std::vector<PhaseSymbol> symbols_;
  EffectiveSymbol es_;
  std::vector<CompiledExpr> sym_compiled_;
  std::vector<std::vector<CompiledExpr>> ham_compiled_;
  std::vector<std::vector<CompiledExpr>> base_compiled_;
};

}  // namespace phasemetric
