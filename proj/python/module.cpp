#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "jetcalc/coverings.hpp"
#include "jetcalc/kovalevskaya.hpp"
#include "jetcalc/operators.hpp"
#include "jetcalc/syslang.hpp"
#include "jetcalc/variational.hpp"

namespace py = pybind11;
using namespace jetcalc;

namespace {

// Expressions and operators carry the context they were parsed in.
struct PyExpr {
  Expr e;
  ContextPtr ctx;
};

struct PyOperator {
  TotalDiffOp op;
  ContextPtr ctx;
};

struct PySystem {
  SystemFile file;

  // a Lagrangian-only file stands for its Euler-Lagrange system
  PdeSystem system() const {
    PdeSystem s = file.system();
    if (s.equations.empty() && file.lagrangian) s.equations = euler(*file.lagrangian, s.num_dependents());
    return s;
  }
  PdeSystem with_equations() const {
    PdeSystem s = system();
    if (s.equations.empty()) throw ExprError("system has no equations or lagrangian");
    return s;
  }
  PyExpr wrap(const Expr& e) const { return {e, file.ctx}; }
};

void same_context(const PyExpr& a, const PyExpr& b) {
  if (a.ctx != b.ctx) throw ExprError("expressions belong to different systems");
}

std::vector<PyExpr> wrap_all(const std::vector<Expr>& v, const ContextPtr& ctx) {
  std::vector<PyExpr> out;
  for (const auto& e : v) out.push_back({e, ctx});
  return out;
}

int independent_index(const Context& ctx, const std::string& name) {
  auto i = ctx.find_independent(name);
  if (!i) throw ExprError("unknown independent variable '" + name + "'");
  return *i;
}

// components keyed by dependent name; absent ones are zero
std::vector<Expr> components(const PySystem& s, const std::map<std::string, std::string>& comps) {
  const Context& ctx = *s.file.ctx;
  std::vector<Expr> out(static_cast<std::size_t>(ctx.num_dependents()));
  for (const auto& [name, text] : comps) {
    auto j = ctx.find_dependent(name);
    if (!j) throw ExprError("unknown dependent variable '" + name + "'");
    out[static_cast<std::size_t>(*j)] = parse_expression(text, ctx);
  }
  return out;
}

py::dict evidence_dict(const Evidence& ev) {
  py::dict d;
  d["verdict"] = to_string(ev.verdict);
  d["affirmative"] = ev.affirmative();
  d["sampled"] = ev.sampled;
  d["float_mode"] = ev.float_mode;
  if (ev.sampled) {
    d["seed"] = ev.seed;
    d["trials"] = ev.trials;
  }
  if (!ev.witness.empty()) d["witness"] = ev.witness;
  return d;
}

PySystem load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExprError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return {parse_system(buf.str())};
}

}  // namespace

PYBIND11_MODULE(_jetcalc, m) {
  m.doc() = "Symbolic jet-space calculus";

  auto expr_error = py::register_exception<ExprError>(m, "ExprError", PyExc_ValueError);
  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      py::object err = py::reinterpret_borrow<py::object>(parse_error.ptr())(e.what());
      err.attr("line") = e.line();
      err.attr("column") = e.column();
      err.attr("message") = e.message();
      PyErr_SetObject(parse_error.ptr(), err.ptr());
    }
  });
  (void)expr_error;

  py::class_<PyExpr>(m, "Expr")
      .def("__str__", [](const PyExpr& x) { return format(x.e, *x.ctx); })
      .def("__repr__", [](const PyExpr& x) { return "Expr('" + format(x.e, *x.ctx) + "')"; })
      .def("__eq__",
           [](const PyExpr& a, const PyExpr& b) { return a.ctx == b.ctx && a.e == b.e; })
      .def("__hash__", [](const PyExpr& x) { return py::hash(py::str(format(x.e, *x.ctx))); })
      .def("__add__", [](const PyExpr& a, const PyExpr& b) { same_context(a, b); return PyExpr{a.e + b.e, a.ctx}; })
      .def("__sub__", [](const PyExpr& a, const PyExpr& b) { same_context(a, b); return PyExpr{a.e - b.e, a.ctx}; })
      .def("__mul__", [](const PyExpr& a, const PyExpr& b) { same_context(a, b); return PyExpr{a.e * b.e, a.ctx}; })
      .def("__truediv__",
           [](const PyExpr& a, const PyExpr& b) { same_context(a, b); return PyExpr{a.e / b.e, a.ctx}; })
      .def("__pow__", [](const PyExpr& a, long n) { return PyExpr{pow(a.e, n), a.ctx}; })
      .def("__neg__", [](const PyExpr& a) { return PyExpr{-a.e, a.ctx}; })
      .def("is_zero", [](const PyExpr& x) { return x.e.is_zero(); })
      .def(
          "D", [](const PyExpr& x, const std::string& var) {
            return PyExpr{total_derivative(x.e, independent_index(*x.ctx, var)), x.ctx};
          },
          py::arg("variable"), "Total derivative along an independent variable.");

  py::class_<PyOperator>(m, "Operator")
      .def("__str__", [](const PyOperator& o) { return format(o.op, *o.ctx); })
      .def("__repr__", [](const PyOperator& o) { return "Operator('" + format(o.op, *o.ctx) + "')"; })
      .def_property_readonly("shape", [](const PyOperator& o) { return std::make_pair(o.op.rows(), o.op.cols()); })
      .def("adjoint", [](const PyOperator& o) { return PyOperator{adjoint(o.op), o.ctx}; })
      .def("__matmul__",
           [](const PyOperator& a, const PyOperator& b) {
             if (a.ctx != b.ctx) throw ExprError("operators belong to different systems");
             return PyOperator{compose(a.op, b.op), a.ctx};
           })
      .def("__sub__",
           [](const PyOperator& a, const PyOperator& b) {
             if (a.ctx != b.ctx) throw ExprError("operators belong to different systems");
             return PyOperator{a.op - b.op, a.ctx};
           })
      .def(
          "equals",
          [](const PyOperator& a, const PyOperator& b) {
            if (a.ctx != b.ctx) throw ExprError("operators belong to different systems");
            return evidence_dict(op_equals(a.op, b.op, *a.ctx).evidence);
          },
          "Compare coefficient-wise; returns the evidence record.")
      .def("__call__", [](const PyOperator& o, const std::vector<PyExpr>& phi) {
        std::vector<Expr> v;
        for (const auto& p : phi) {
          if (p.ctx != o.ctx) throw ExprError("operand belongs to a different system");
          v.push_back(p.e);
        }
        return wrap_all(apply_operator(o.op, v), o.ctx);
      });

  py::class_<PySystem>(m, "System")
      .def_static("parse", [](const std::string& text) { return PySystem{parse_system(text)}; }, py::arg("text"))
      .def_static("load", &load_file, py::arg("path"))
      .def("text", [](const PySystem& s) { return print_system(s.file); })
      .def_property_readonly("independents", [](const PySystem& s) { return s.file.ctx->independents; })
      .def_property_readonly("dependents", [](const PySystem& s) { return s.file.ctx->dependents; })
      .def_property_readonly("equations",
                             [](const PySystem& s) { return wrap_all(s.system().equations, s.file.ctx); })
      .def_property_readonly("lagrangian",
                             [](const PySystem& s) -> std::optional<PyExpr> {
                               if (!s.file.lagrangian) return std::nullopt;
                               return s.wrap(*s.file.lagrangian);
                             })
      .def(
          "expr", [](const PySystem& s, const std::string& text) { return s.wrap(parse_expression(text, *s.file.ctx)); },
          py::arg("text"))
      .def(
          "operator",
          [](const PySystem& s, const std::string& name) { return PyOperator{s.file.find_operator(name), s.file.ctx}; },
          py::arg("name"))
      .def("linearize", [](const PySystem& s) { return PyOperator{linearize(s.with_equations()), s.file.ctx}; });

  m.def(
      "euler",
      [](const PySystem& s, std::optional<PyExpr> density) {
        const Context& ctx = *s.file.ctx;
        Expr lag;
        if (density) {
          if (density->ctx != s.file.ctx) throw ExprError("density belongs to a different system");
          lag = density->e;
        } else if (s.file.lagrangian) {
          lag = *s.file.lagrangian;
        } else {
          throw ExprError("system has no lagrangian");
        }
        return wrap_all(euler(lag, ctx.num_dependents()), s.file.ctx);
      },
      py::arg("system"), py::arg("density") = py::none(), "Euler-Lagrange expressions, one per dependent variable.");

  m.def(
      "is_variational",
      [](const PySystem& s) {
        VariationalResult r = is_variational(s.with_equations());
        py::dict d;
        d["variational"] = r.variational;
        d["evidence"] = evidence_dict(r.comparison.evidence);
        d["difference"] = format(r.difference, *s.file.ctx);
        d["note"] = r.note;
        d["lagrangian"] = r.lagrangian ? py::cast(s.wrap(*r.lagrangian)) : py::none();
        return d;
      },
      py::arg("system"));

  m.def(
      "kovalevskaya",
      [](const PySystem& s, const std::string& direction, const std::string& hints) {
        PdeSystem sys = s.with_equations();
        const Context& ctx = *s.file.ctx;
        int dir = independent_index(ctx, direction);
        KovalevskayaForm f = to_kovalevskaya(sys, dir, hints.empty() ? KovalevskayaHints{} : parse_hints(hints, ctx));
        py::dict rhs;
        for (std::size_t j = 0; j < f.data.rhs.size(); ++j) rhs[py::str(ctx.dependents[j])] = s.wrap(f.data.rhs[j]);
        py::dict d;
        d["orders"] = f.data.orders;
        d["rhs"] = rhs;
        d["audit"] = format_audit(f.audit, dir, ctx);
        d["valid"] = validate_kovalevskaya(f.data, sys, &f.audit).valid;
        return d;
      },
      py::arg("system"), py::arg("direction"), py::arg("hints") = "");

  m.def(
      "is_symmetry",
      [](const PySystem& s, const std::map<std::string, std::string>& comps) {
        return evidence_dict(is_symmetry(components(s, comps), s.with_equations()).evidence);
      },
      py::arg("system"), py::arg("components"));

  m.def(
      "lagrangian_covering",
      [](const PySystem& s, const std::string& density, const std::vector<std::string>& velocity) {
        return PySystem{covering_to_file(build_lagrangian_covering(s.with_equations(), density, velocity))};
      },
      py::arg("system"), py::arg("density"), py::arg("velocity"));

  m.def(
      "verify_covering",
      [](const PySystem& s) {
        CoveringSystem cov = covering_from_file(s.file);
        CoveringVerdict v = verify_covering_consistency(cov);
        py::dict d;
        d["evidence"] = evidence_dict(v.evidence);
        d["residual"] = PyExpr{v.residual, cov.total.ctx};
        d["mass_residual"] = PyExpr{v.mass_residual, cov.base.ctx};
        return d;
      },
      py::arg("covering"));
}
