// probt: exact evaluator, sampler, and transformation toolkit for System T
// with fair binary choice, geometric draws, and the probabilistic fixpoint.
//
// Every command reads one term per file (`--` starts a comment), prints one
// JSON object on standard output, and sends diagnostics to standard error.
// Identical command lines produce byte-identical output. Exit codes:
//   0  success
//   1  resource exhaustion (reported residual above the requested epsilon,
//      capped sample trajectories, or an exhausted exact-tree work budget)
//   2  user error (bad flags, unreadable files, parse/type errors, a pass
//      applied outside its fragment)
#include <CLI11.hpp>
#include <json.hpp>

#include <probt/dist.hpp>
#include <probt/eval.hpp>
#include <probt/multistep.hpp>
#include <probt/syntax.hpp>
#include <probt/transforms.hpp>
#include <probt/typecheck.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

using namespace probt;
using ordered_json = nlohmann::ordered_json;

namespace {

// Exact epsilon syntax: "0", an integer, "p/q", or "2^-k".
Rat parse_eps(const std::string& s) {
  Rat q;
  if (s.rfind("2^-", 0) == 0) {
    q = pow2_inv(std::stoul(s.substr(3)));
  } else if (auto slash = s.find('/'); slash != std::string::npos) {
    q = Rat(Int(s.substr(0, slash)), Int(s.substr(slash + 1)));
    q.canonicalize();
  } else {
    q = Rat(Int(s));
  }
  if (sgn(q) < 0 || q >= 1)
    throw std::runtime_error("--eps must lie in [0, 1), got " + s);
  return q;
}

struct Loaded {
  TermPtr term;
  TypePtr type;
};

Loaded load(const std::string& path) {
  TermPtr t = parse_term_file(path);
  return {t, infer(t)};
}

ordered_json dist_to_json(const Dist& d) {
  return ordered_json::parse(dist_json(d));
}

void emit(const ordered_json& j) { std::cout << j.dump() << "\n"; }

int run_check(const std::string& file) {
  Loaded in = load(file);
  ordered_json j;
  j["type"] = print_type(in.type);
  emit(j);
  return 0;
}

int run_eval(const std::string& file, const Budget& b, const std::string& mode,
             uint64_t max_steps) {
  Loaded in = load(file);
  if (mode == "exact-tree") {
    ExactResult ex = exact_eval_plus(in.term, max_steps == 0 ? 10000000
                                                             : max_steps);
    ordered_json j = dist_to_json(ex.values);
    j["success_lower"] = rat_str(ex.values.mass());
    j["success_upper"] = rat_str(ex.values.total());
    j["avlength_lower"] = rat_str(ex.expected_steps);
    j["expected_steps"] = rat_str(ex.expected_steps);
    j["mode"] = mode;
    emit(j);
    return 0;
  }
  Budget bb = b;
  bb.mode = mode == "worklist" ? EvalMode::Worklist : EvalMode::Lockstep;
  if (max_steps) bb.max_depth = max_steps;
  EvalResult r = evaluate(in.term, bb);
  ordered_json j = dist_to_json(r.values);
  j["success_lower"] = rat_str(r.values.mass());
  j["success_upper"] = rat_str(r.values.total());
  j["avlength_lower"] = rat_str(r.av_length_partial());
  j["exhausted"] = r.exhausted;
  j["mode"] = mode;
  emit(j);
  return r.values.residual > bb.epsilon ? 1 : 0;
}

int run_sample(const std::string& file, uint64_t seed, uint64_t trials,
               uint64_t max_steps) {
  Loaded in = load(file);
  SampleStats st =
      sample_many(in.term, trials, seed, max_steps == 0 ? 1000000 : max_steps);
  ordered_json j = dist_to_json(st.empirical);
  j["seed"] = seed;
  j["trials"] = st.trials;
  j["capped"] = st.capped;
  j["mean_steps"] = rat_str(st.mean_steps);
  emit(j);
  return st.capped > 0 ? 1 : 0;
}

int run_transform(const std::string& file, const std::string& pass,
                  const std::string& out) {
  Loaded in = load(file);
  TermPtr res;
  if (pass == "oplus-to-rand") {
    res = encode_choice(in.term, ChoiceTarget::Rand);
  } else if (pass == "oplus-to-fixran") {
    res = encode_choice(in.term, ChoiceTarget::FixRan);
  } else if (pass == "rand-to-fixran") {
    res = encode_rand_via_fixran(in.term);
  } else if (pass == "fixran-to-rand") {
    res = encode_fixran_via_rand(in.term);
  } else if (pass == "lift-plus") {
    res = lift_plus_to_t(in.term);
  } else if (pass == "finite-rep") {
    FiniteRep fr = finite_rep(in.term);
    res = mk_pair(fr.F, fr.Q);  // one term per file: the (F, Q) pair
  } else if (pass == "approximant") {
    res = approximant(in.term);
  } else if (pass == "derand-mc") {
    res = derandomize_mc(in.term);
  } else if (pass == "derand-lv") {
    res = derandomize_lv(in.term);
  } else {
    throw std::runtime_error("unknown pass: " + pass);
  }
  TypePtr ty = infer(res);
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << "-- " << pass << " of " << file << "\n" << print_term(res) << "\n";
  if (!os.flush()) throw std::runtime_error("write failed: " + out);
  ordered_json j;
  j["pass"] = pass;
  j["out"] = out;
  j["type"] = print_type(ty);
  emit(j);
  return 0;
}

int run_avlength(const std::string& file, const Budget& b,
                 uint64_t max_steps) {
  Loaded in = load(file);
  Budget bb = b;
  if (max_steps) bb.max_depth = max_steps;
  EvalResult r = evaluate(in.term, bb);
  ordered_json j;
  j["avlength_lower"] = rat_str(r.av_length_partial());
  j["residual"] = rat_str(r.values.residual);
  j["exhausted"] = r.exhausted;
  emit(j);
  return r.values.residual > bb.epsilon ? 1 : 0;
}

int run_compare(const std::string& f1, const std::string& f2,
                const Budget& b) {
  Loaded a = load(f1);
  Loaded c = load(f2);
  EvalResult ra = evaluate(a.term, b);
  EvalResult rc = evaluate(c.term, b);
  Rat upper = tv_distance(ra.values, rc.values);
  Rat slack = ra.values.residual + rc.values.residual;
  Rat lower = upper - slack;
  if (sgn(lower) < 0) lower = Rat(0);
  ordered_json j;
  j["tv_lower"] = rat_str(lower);
  j["tv_upper"] = rat_str(upper);
  j["residual_left"] = rat_str(ra.values.residual);
  j["residual_right"] = rat_str(rc.values.residual);
  emit(j);
  return ra.values.residual > b.epsilon || rc.values.residual > b.epsilon ? 1
                                                                          : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "exact evaluator and transformation toolkit for randomized System T"};
  app.require_subcommand(1);

  std::string file, file2, out, pass;
  std::string eps_str = "2^-20";
  std::string mode = "lockstep";
  uint64_t seed = 1, trials = 10000, max_steps = 0, rand_width = 0;

  auto add_budget = [&](CLI::App* cmd) {
    cmd->add_option("--eps", eps_str,
                    "target residual: \"p/q\", an integer, or \"2^-k\"");
    cmd->add_option("--max-steps", max_steps,
                    "work cap (lifted rounds, tree nodes, or trajectory "
                    "steps, by command)");
    cmd->add_option("--rand-width", rand_width,
                    "fixed truncation width for every geometric draw "
                    "(0: adaptive from eps)");
  };

  CLI::App* check = app.add_subcommand("check", "parse and print the type");
  check->add_option("file", file)->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate to a distribution");
  eval->add_option("file", file)->required();
  eval->add_option("--mode", mode, "lockstep | worklist | exact-tree")
      ->check(CLI::IsMember({"lockstep", "worklist", "exact-tree"}));
  add_budget(eval);

  CLI::App* sample =
      app.add_subcommand("sample", "empirical distribution from trajectories");
  sample->add_option("file", file)->required();
  sample->add_option("--seed", seed, "RNG seed");
  sample->add_option("--trials", trials, "number of trajectories")
      ->check(CLI::PositiveNumber);
  sample->add_option("--max-steps", max_steps, "per-trajectory step cap");

  CLI::App* transform =
      app.add_subcommand("transform", "apply a source-to-source pass");
  transform->add_option("file", file)->required();
  transform->add_option("--pass", pass)
      ->required()
      ->check(CLI::IsMember({"oplus-to-rand", "fixran-to-rand",
                             "oplus-to-fixran", "rand-to-fixran", "lift-plus",
                             "finite-rep", "approximant", "derand-mc",
                             "derand-lv"}));
  transform->add_option("-o,--out", out, "output term file")->required();

  CLI::App* avlength = app.add_subcommand(
      "avlength", "lower bound on the average trajectory length");
  avlength->add_option("file", file)->required();
  add_budget(avlength);

  CLI::App* compare =
      app.add_subcommand("compare", "total-variation distance of two terms");
  compare->add_option("file1", file)->required();
  compare->add_option("file2", file2)->required();
  add_budget(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Budget b;
    b.epsilon = parse_eps(eps_str);
    b.rand_width = static_cast<unsigned>(rand_width);
    if (check->parsed()) return run_check(file);
    if (eval->parsed()) return run_eval(file, b, mode, max_steps);
    if (sample->parsed()) return run_sample(file, seed, trials, max_steps);
    if (transform->parsed()) return run_transform(file, pass, out);
    if (avlength->parsed()) return run_avlength(file, b, max_steps);
    if (compare->parsed()) return run_compare(file, file2, b);
    return 2;
  } catch (const EvalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    // A blown work budget is resource exhaustion, not misuse.
    return std::string(e.what()).find("exceeded the work budget") !=
                   std::string::npos
               ? 1
               : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
