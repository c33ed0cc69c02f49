// Command-line driver: type checking, sampling, exhaustive enumeration,
// denotational evaluation and the verification suite for .qpl programs.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "qpl/denotational.hpp"
#include "qpl/json_out.hpp"
#include "qpl/operational.hpp"
#include "qpl/parser.hpp"
#include "qpl/typecheck.hpp"
#include "qpl/verify.hpp"

namespace {

using namespace qpl;

constexpr int kExitOk = 0;
constexpr int kExitStatic = 1;
constexpr int kExitVerify = 2;
constexpr int kExitRuntime = 3;

struct CliConfig {
  std::string file;
  std::uint64_t seed = 0;
  long max_steps = 10000;
  int depth = 8;
  long fix_iters = 64;
  double tol = 1e-9;
  std::string format = "text";
  std::string gates_file;
  int max_qubits = 12;
  bool superop = false;
  std::string dot_file;
  std::string tree_file;

  bool json() const { return format == "json"; }
};

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::capacity_exceeded:
    case Errc::timeout:
    case Errc::stuck_configuration:
    case Errc::internal_error:
      return kExitRuntime;
    default:
      return kExitStatic;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::syntax_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GateRegistry load_gates(const std::string& path) {
  GateRegistry registry;
  if (path.empty()) return registry;
  nlohmann::json doc = nlohmann::json::parse(read_file(path));
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& matrix_json = it.value().at("matrix");
    long dim = static_cast<long>(matrix_json.size());
    Matrix m(dim, dim);
    for (long r = 0; r < dim; ++r) {
      const auto& row = matrix_json.at(r);
      if (static_cast<long>(row.size()) != dim)
        fail(Errc::unknown_gate, "gate " + it.key() + " matrix is ragged");
      for (long c = 0; c < dim; ++c) {
        const auto& entry = row.at(c);
        m(r, c) = Complex(entry.at(0).get<double>(),
                          entry.at(1).get<double>());
      }
    }
    registry.register_gate(it.key(), m);
  }
  return registry;
}

Configuration load_program(const CliConfig& cfg, const GateRegistry& gates) {
  TermRef core = parse_and_desugar(read_file(cfg.file));
  Configuration c = make_initial_config(core);
  check_config(c, &gates);  // reject ill-formed programs up front
  return c;
}

std::string round_str(double x, double grid = 1e-10) {
  double r = std::round(x / grid) * grid;
  if (r == 0.0) r = 0.0;  // normalize -0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", r);
  return buf;
}

std::string matrix_to_text(const Matrix& m) {
  std::string out;
  for (long r = 0; r < m.rows(); ++r) {
    out += "  [";
    for (long c = 0; c < m.cols(); ++c) {
      if (c) out += ", ";
      double re = m(r, c).real();
      double im = m(r, c).imag();
      out += round_str(re);
      if (std::abs(im) > 1e-10) out += (im > 0 ? "+" : "") + round_str(im) + "i";
    }
    out += "]\n";
  }
  return out;
}

std::string assignment_to_text(const Assignment& v) {
  std::string out;
  for (const auto& [name, value] : v) {
    if (!out.empty()) out += ", ";
    out += name + " = " + value_to_string(value);
  }
  return out.empty() ? "(empty)" : out;
}

void emit_matrix_json(JsonWriter& w, const Matrix& m) {
  w.begin_array();
  for (long r = 0; r < m.rows(); ++r) {
    w.begin_array();
    for (long c = 0; c < m.cols(); ++c) {
      w.begin_array();
      w.value(m(r, c).real());
      w.value(m(r, c).imag());
      w.end_array();
    }
    w.end_array();
  }
  w.end_array();
}

// ---------------------------------------------------------------------------

int cmd_check(const CliConfig& cfg, const GateRegistry& gates) {
  TermRef core = parse_and_desugar(read_file(cfg.file));
  Configuration c = make_initial_config(core);
  ProcCtx pi = check_store(c.store, &gates);
  VarCtx sigma = check_term(pi, {}, c.term, &gates);

  if (cfg.json()) {
    JsonWriter w;
    w.begin_object();
    w.key("procedures");
    w.begin_array();
    for (const auto& [name, sig] : pi) {
      w.begin_object();
      w.field("name", name);
      if (sig.bound) w.field("bound", *sig.bound);
      w.field("input", type_display(sig.in_type));
      w.field("output", type_display(sig.out_type));
      w.end_object();
    }
    w.end_array();
    w.field("main_input", std::string(""));
    std::string out_ctx;
    for (const auto& [name, ty] : sigma) {
      if (!out_ctx.empty()) out_ctx += ", ";
      out_ctx += name + " : " + type_display(ty);
    }
    w.field("main_output", out_ctx);
    w.end_object();
    std::cout << w.str() << "\n";
  } else {
    for (const auto& [name, sig] : pi) {
      std::cout << name;
      if (sig.bound) std::cout << "^" << *sig.bound;
      std::cout << " : " << type_display(sig.in_type) << " -> "
                << type_display(sig.out_type) << "\n";
    }
    std::string out_ctx;
    for (const auto& [name, ty] : sigma) {
      if (!out_ctx.empty()) out_ctx += ", ";
      out_ctx += name + " : " + type_display(ty);
    }
    std::cout << "main : <> -> <" << out_ctx << ">\n";
  }
  return kExitOk;
}

int cmd_run(const CliConfig& cfg, const GateRegistry& gates) {
  Configuration c = load_program(cfg, gates);
  SampleOptions opts;
  opts.max_steps = cfg.max_steps;
  opts.max_qubits = cfg.max_qubits;
  SampleResult r = sample(c, cfg.seed, opts, &gates);

  if (cfg.json()) {
    JsonWriter w;
    w.begin_object();
    w.field("seed", static_cast<long>(cfg.seed));
    w.field("steps", r.steps);
    w.field("probability", r.probability);
    w.field("terminal", r.config.is_skip_terminal() ? "skip" : "zero");
    w.field("assignment", assignment_to_text(r.config.assignment));
    w.key("rho");
    emit_matrix_json(w, r.config.rho.data);
    w.end_object();
    std::cout << w.str() << "\n";
  } else {
    std::cout << "terminal (" << (r.config.is_skip_terminal() ? "skip" : "0")
              << ") after " << r.steps << " steps\n";
    std::cout << "assignment: " << assignment_to_text(r.config.assignment)
              << "\n";
    std::cout << "path probability: " << round_str(r.probability) << "\n";
    if (r.config.rho.dim() <= 16)
      std::cout << "rho (" << r.config.rho.n_qubits << " qubits):\n"
                << matrix_to_text(r.config.rho.data);
    else
      std::cout << "rho: " << r.config.rho.n_qubits << " qubits, trace "
                << round_str(r.config.rho.trace()) << "\n";
  }
  return kExitOk;
}

int cmd_enumerate(const CliConfig& cfg, const GateRegistry& gates) {
  Configuration c = load_program(cfg, gates);
  EnumOptions opts;
  opts.max_steps = cfg.max_steps;
  opts.max_qubits = cfg.max_qubits;
  opts.build_tree = !cfg.dot_file.empty() || !cfg.tree_file.empty();
  EnumerationResult r = enumerate(c, opts, &gates);

  // group leaves by (assignment, rho rounded to 1e-10)
  struct Group {
    double trace = 0.0;
    long count = 0;
    long first_depth = 0;
  };
  std::map<std::string, Group> groups;
  for (const Leaf& leaf : r.leaves) {
    std::string key = leaf.config.is_skip_terminal() ? "skip | " : "0 | ";
    key += assignment_to_text(leaf.config.assignment);
    key += " | ";
    for (long i = 0; i < leaf.config.rho.data.rows(); ++i)
      for (long j = 0; j < leaf.config.rho.data.cols(); ++j) {
        key += round_str(leaf.config.rho.data(i, j).real()) + "," +
               round_str(leaf.config.rho.data(i, j).imag()) + ";";
      }
    auto [it, fresh] = groups.emplace(key, Group{});
    it->second.trace += leaf.config.trace();
    it->second.count += 1;
    if (fresh) it->second.first_depth = leaf.depth;
  }

  if (!cfg.tree_file.empty()) {
    JsonWriter w;
    w.begin_object();
    w.key("nodes");
    w.begin_array();
    for (size_t i = 0; i < r.nodes.size(); ++i) {
      const TreeNode& n = r.nodes[i];
      w.begin_object();
      w.field("id", static_cast<long>(i));
      w.field("depth", n.depth);
      w.field("term", pretty_print(n.config.term));
      w.field("assignment", assignment_to_text(n.config.assignment));
      w.field("trace", n.config.trace());
      w.field("terminal", n.config.terminal());
      w.end_object();
    }
    w.end_array();
    w.key("edges");
    w.begin_array();
    for (size_t i = 0; i < r.nodes.size(); ++i)
      for (long child : r.nodes[i].children) {
        w.begin_object();
        w.field("from", static_cast<long>(i));
        w.field("to", child);
        w.field("probability",
                r.nodes[i].config.trace() > 0
                    ? r.nodes[child].config.trace() / r.nodes[i].config.trace()
                    : 0.0);
        w.end_object();
      }
    w.end_array();
    w.end_object();
    std::ofstream out(cfg.tree_file);
    out << w.str() << "\n";
  }
  if (!cfg.dot_file.empty()) {
    std::ofstream out(cfg.dot_file);
    out << "digraph reduction {\n";
    for (size_t i = 0; i < r.nodes.size(); ++i) {
      out << "  n" << i << " [label=\"" << round_str(r.nodes[i].config.trace())
          << (r.nodes[i].config.terminal() ? " T" : "") << "\"];\n";
      for (long child : r.nodes[i].children)
        out << "  n" << i << " -> n" << child << ";\n";
    }
    out << "}\n";
  }

  if (cfg.json()) {
    JsonWriter w;
    w.begin_object();
    w.field("max_steps", cfg.max_steps);
    w.field("halt_lower_bound", r.halt_lower_bound);
    w.field("frontier_mass", r.frontier_mass);
    w.field("leaves", static_cast<long>(r.leaves.size()));
    w.key("groups");
    w.begin_array();
    for (const auto& [key, g] : groups) {
      w.begin_object();
      w.field("outcome", key.substr(0, key.find(" | ", key.find(" | ") + 1)));
      w.field("count", g.count);
      w.field("total_trace", g.trace);
      w.end_object();
    }
    w.end_array();
    w.end_object();
    std::cout << w.str() << "\n";
  } else {
    std::cout << "terminal groups (" << r.leaves.size() << " leaves):\n";
    for (const auto& [key, g] : groups) {
      std::string outcome = key.substr(0, key.find(" | ", key.find(" | ") + 1));
      std::cout << "  " << outcome << "   x" << g.count << "   total trace "
                << round_str(g.trace) << "\n";
    }
    std::cout << "halt lower bound: " << round_str(r.halt_lower_bound)
              << "\n";
    std::cout << "frontier mass:    " << round_str(r.frontier_mass) << "\n";
  }
  return kExitOk;
}

int cmd_denote(const CliConfig& cfg, const GateRegistry& gates) {
  Configuration c = load_program(cfg, gates);
  DenoteParams dp;
  dp.depth = cfg.depth;
  dp.fix_iters = cfg.fix_iters;
  Denoter denoter(dp, &gates);

  if (cfg.superop) {
    ProcEnv env = denoter.denote_store(c.store);
    VarCtx gamma = assignment_context(c.assignment);
    auto [op, sigma] = denoter.denote_term(c.term, env, gamma);
    if (cfg.json()) {
      JsonWriter w;
      w.begin_object();
      w.field("domain", space_to_string(op.dom));
      w.field("codomain", space_to_string(op.cod));
      w.field("output_context", var_ctx_to_string(sigma));
      w.key("transfer");
      emit_matrix_json(w, op.transfer);
      w.end_object();
      std::cout << w.str() << "\n";
    } else {
      std::cout << "superoperator " << space_to_string(op.dom) << " -> "
                << space_to_string(op.cod) << "\n";
      std::cout << "output context: <" << var_ctx_to_string(sigma) << ">\n";
      std::cout << matrix_to_text(op.transfer);
    }
    return kExitOk;
  }

  ConfigDenotation d = denoter.denote_config(c);
  if (cfg.json()) {
    JsonWriter w;
    w.begin_object();
    w.field("depth", cfg.depth);
    w.field("fix_iters", cfg.fix_iters);
    std::string ctx_disp;
    for (const auto& [name, ty] : d.sigma) {
      if (!ctx_disp.empty()) ctx_disp += ", ";
      ctx_disp += name + " : " + type_display(ty);
    }
    w.field("context", ctx_disp);
    w.field("space", space_to_string(d.state.space));
    w.field("mass", d.state.mass());
    w.field("truncation_loss", d.trunc_loss);
    w.key("blocks");
    w.begin_array();
    for (long b = 0; b < d.state.space.n_blocks(); ++b)
      emit_matrix_json(w, d.state.block(b));
    w.end_array();
    w.key("warnings");
    w.begin_array();
    for (const auto& warning : denoter.warnings()) w.value(warning);
    w.end_array();
    w.end_object();
    std::cout << w.str() << "\n";
  } else {
    std::string ctx_disp;
    for (const auto& [name, ty] : d.sigma) {
      if (!ctx_disp.empty()) ctx_disp += ", ";
      ctx_disp += name + " : " + type_display(ty);
    }
    std::cout << "final state on <" << ctx_disp << "> = "
              << space_to_string(d.state.space) << "\n";
    std::cout << "total mass: " << round_str(d.state.mass()) << "\n";
    std::cout << "truncation loss: " << round_str(d.trunc_loss) << "\n";
    for (long b = 0; b < d.state.space.n_blocks(); ++b) {
      Matrix m = d.state.block(b);
      if (m.cwiseAbs().maxCoeff() <= 1e-12) continue;
      std::cout << "block " << b << " (dim " << d.state.space.blocks[b]
                << "):\n"
                << matrix_to_text(m);
    }
    for (const auto& warning : denoter.warnings())
      std::cout << "warning: " << warning << "\n";
  }
  return kExitOk;
}

int cmd_verify(const CliConfig& cfg, const GateRegistry& gates) {
  Configuration c = load_program(cfg, gates);
  VerifyParams params;
  params.depth = cfg.depth;
  params.fix_iters = cfg.fix_iters;
  params.max_steps = cfg.max_steps;
  params.tol = cfg.tol;
  params.max_qubits = cfg.max_qubits;
  VerificationReport report = verify_program(cfg.file, c, params, &gates);

  if (cfg.json()) {
    JsonWriter w;
    w.begin_object();
    w.field("program", report.program);
    w.key("parameters");
    w.begin_object();
    w.field("depth", params.depth);
    w.field("fix_iters", params.fix_iters);
    w.field("max_steps", params.max_steps);
    w.field("tol", params.tol);
    w.end_object();
    w.key("checks");
    w.begin_array();
    for (const auto& rec : report.records) {
      w.begin_object();
      w.field("name", rec.name);
      w.field("status", status_name(rec.status));
      w.field("max_error", rec.max_error);
      w.field("tolerance", rec.tolerance);
      if (!rec.detail.empty()) w.field("detail", rec.detail);
      w.end_object();
    }
    w.end_array();
    w.field("failed", report.failed());
    w.end_object();
    std::cout << w.str() << "\n";
  } else {
    std::printf("verification of %s (depth %d, fix_iters %ld, max_steps %ld)\n",
                report.program.c_str(), params.depth, params.fix_iters,
                params.max_steps);
    for (const auto& rec : report.records) {
      std::printf("  %-28s %-4s  max_error %-12.3e tol %-10.1e %s\n",
                  rec.name.c_str(), status_name(rec.status), rec.max_error,
                  rec.tolerance, rec.detail.c_str());
    }
  }
  return report.failed() ? kExitVerify : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QPL interpreter and dual-semantics verifier"};
  app.require_subcommand(1);

  CliConfig cfg;
  auto add_common = [&](CLI::App* sub, bool require_steps = false) {
    sub->add_option("file", cfg.file, "program file (.qpl)")->required();
    sub->add_option("--seed", cfg.seed, "sampling seed");
    auto* steps =
        sub->add_option("--max-steps", cfg.max_steps, "reduction step budget");
    if (require_steps) steps->required();
    sub->add_option("--depth", cfg.depth, "mu-type truncation depth k");
    sub->add_option("--fix-iters", cfg.fix_iters, "Kleene fixpoint iterations");
    sub->add_option("--tol", cfg.tol, "verification tolerance");
    sub->add_option("--format", cfg.format, "output format: text|json")
        ->check(CLI::IsMember({"text", "json"}));
    sub->add_option("--gates", cfg.gates_file, "custom gate registry (JSON)");
    sub->add_option("--max-qubits", cfg.max_qubits, "qubit capacity");
  };

  CLI::App* check = app.add_subcommand("check", "parse and type-check");
  add_common(check);
  CLI::App* run = app.add_subcommand("run", "sample one execution");
  add_common(run);
  CLI::App* enumerate_cmd =
      app.add_subcommand("enumerate", "exhaustive reduction tree");
  add_common(enumerate_cmd, /*require_steps=*/true);
  enumerate_cmd->add_option("--dot", cfg.dot_file, "write the tree as DOT");
  enumerate_cmd->add_option("--tree", cfg.tree_file,
                            "write the tree as JSON");
  CLI::App* denote = app.add_subcommand("denote", "denotational evaluation");
  add_common(denote);
  denote->add_flag("--superop", cfg.superop,
                   "print the main term's superoperator");
  CLI::App* verify = app.add_subcommand("verify", "run the theorem checks");
  add_common(verify);

  CLI11_PARSE(app, argc, argv);

  try {
    GateRegistry gates = load_gates(cfg.gates_file);
    if (check->parsed()) return cmd_check(cfg, gates);
    if (run->parsed()) return cmd_run(cfg, gates);
    if (enumerate_cmd->parsed()) return cmd_enumerate(cfg, gates);
    if (denote->parsed()) return cmd_denote(cfg, gates);
    if (verify->parsed()) return cmd_verify(cfg, gates);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
