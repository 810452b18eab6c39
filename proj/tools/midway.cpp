#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "midway/app.hpp"
#include "midway/matching.hpp"
#include "midway/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace midway;

namespace {

struct Options {
  app::InputPaths inputs;
  std::string filter, treatment, outcome, centre, reference, weighting, scm, out = "midway_out";
  std::vector<std::string> covariates, forced, latent, interventions;
  std::uint64_t seed = kDefaultSeed;
  std::uint64_t rct_n = 0;
  std::size_t n = 0, n_per_centre = 0;
  int centres = 0, port = 8765;
  double caliper = 0, tau = 0;
  bool json_out = false, anonymize = false;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path.string() + "'");
  out << contents;
}

// Only flags the user actually gave enter the request, so CLI and service
// requests with the same fields produce the same output.
json build_request(const std::string& command, const Options& o, const CLI::App& sub) {
  json r = json::object();
  auto given = [&](const char* flag) {
    const auto* opt = sub.get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--treatment")) r["treatment"] = o.treatment;
  if (given("--outcome")) r["outcome"] = o.outcome;
  if (given("--filter")) r["filter"] = o.filter;
  if (given("--seed")) r["seed"] = o.seed;
  if (given("--covariates")) r["covariates"] = o.covariates;
  if (command == "identify") {
    if (given("--forced")) r["forced"] = o.forced;
    if (given("--latent")) r["latent"] = o.latent;
  }
  if (command == "match") {
    if (given("--rct-n")) r["rct_n"] = o.rct_n;
    if (given("--caliper")) r["caliper"] = o.caliper;
  }
  if (command == "monitor") {
    if (given("--centre")) r["centre"] = o.centre;
    if (given("--reference")) r["reference"] = o.reference;
    if (given("--weighting")) r["weighting"] = o.weighting;
    if (o.anonymize) r["anonymize"] = true;
  }
  if (command == "simulate") {
    if (given("--scm")) r["scm"] = json::parse(slurp(o.scm));
    if (given("--n")) r["n"] = o.n;
    if (given("--do")) {
      json d = json::object();
      for (const auto& spec : o.interventions) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
          throw Error(ErrorKind::InvalidArgument, "--do expects NODE=LEVEL, got '" + spec + "'");
        }
        d[spec.substr(0, eq)] = spec.substr(eq + 1);
      }
      r["do"] = d;
    }
    json m = json::object();
    if (given("--centres")) m["centres"] = o.centres;
    if (given("--n-per-centre")) m["n_per_centre"] = o.n_per_centre;
    if (given("--tau")) m["tau"] = o.tau;
    if (!m.empty()) r["multicentre"] = m;
  }
  return r;
}

int run_command(const std::string& command, const Options& o, const CLI::App& sub) {
  const json request = build_request(command, o, sub);
  const auto ws = command == "simulate" ? app::Workspace() : app::Workspace::load(o.inputs);
  const auto out = app::run(command, ws, request);
  fs::create_directories(o.out);
  for (const auto& [name, contents] : out.files) write_file(fs::path(o.out) / name, contents);
  write_file(fs::path(o.out) / (command + ".manifest.json"), app::manifest(command, request, ws, out));
  std::cout << (o.json_out ? out.body + (out.body.ends_with('\n') ? "" : "\n") : out.text);
  return out.exit_code;
}

int serve(const Options& o) {
  const auto ws = app::Workspace::load(o.inputs);
  httplib::Server server;
  app::install_routes(server, ws);
  if (!server.bind_to_port("127.0.0.1", o.port)) {
    std::cerr << "error: cannot listen on port " << o.port << " (in use?)\n";
    return 1;
  }
  std::cout << "midway " << app::version() << " listening on http://127.0.0.1:" << o.port << "\n" << std::flush;
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"midway: causal feasibility analysis for observational clinical studies"};
  cli.set_version_flag("--version", app::version());
  cli.require_subcommand(1);
  Options o;

  auto inputs = [&](CLI::App* s) {
    s->add_option("--data", o.inputs.data, "patient CSV");
    s->add_option("--schema", o.inputs.schema, "column schema JSON");
    s->add_option("--dag", o.inputs.dag, "causal graph (DAG DSL)");
  };
  auto common = [&](CLI::App* s) {
    s->add_option("--out", o.out, "output directory")->capture_default_str();
    s->add_option("--seed", o.seed, "random seed")->capture_default_str();
    s->add_flag("--json", o.json_out, "print the JSON payload instead of the text summary");
  };
  auto analysis = [&](CLI::App* s) {
    inputs(s);
    common(s);
    s->add_option("--filter", o.filter, "stratum filter expression");
    s->add_option("--treatment", o.treatment, "treatment column or node");
  };

  auto* identify = cli.add_subcommand("identify", "back-door identification of a causal effect");
  analysis(identify);
  identify->add_option("--outcome", o.outcome, "outcome node");
  identify->add_option("--forced", o.forced, "nodes conditioned on by design")->delimiter(',');
  identify->add_option("--latent", o.latent, "unobserved nodes")->delimiter(',');

  auto* positivity = cli.add_subcommand("positivity", "propensity overlap diagnostics for a stratum");
  analysis(positivity);
  positivity->add_option("--covariates", o.covariates, "propensity covariates")->delimiter(',');

  auto* match = cli.add_subcommand("match", "stochastic propensity matching and RCT-equivalent size");
  analysis(match);
  match->add_option("--covariates", o.covariates, "propensity covariates")->delimiter(',');
  match->add_option("--rct-n", o.rct_n, "RCT sample size to translate")
      ->check(CLI::Validator([](std::string& v) { return v == "0" ? std::string("must be at least 1") : std::string(); },
                             "POSITIVE"));
  match->add_option("--caliper", o.caliper, "caliper on the logit scale")->check(CLI::PositiveNumber);

  auto* monitor = cli.add_subcommand("monitor", "centre effects and Egger IV regression");
  analysis(monitor);
  monitor->add_option("--outcome", o.outcome, "outcome column");
  monitor->add_option("--centre", o.centre, "centre column");
  monitor->add_option("--covariates", o.covariates, "adjustment covariates")->delimiter(',');
  monitor->add_option("--reference", o.reference, "reference centre level");
  monitor->add_option("--weighting", o.weighting, "outcome_precision | unweighted");
  monitor->add_flag("--anonymize", o.anonymize, "replace centre labels by hashed codes in the scatter");

  auto* simulate = cli.add_subcommand("simulate", "sample a dataset from an SCM or the multicentre generator");
  common(simulate);
  simulate->add_option("--scm", o.scm, "SCM JSON document");
  simulate->add_option("--n", o.n, "rows to sample from --scm")->check(CLI::PositiveNumber);
  simulate->add_option("--do", o.interventions, "intervention NODE=LEVEL (repeatable)");
  simulate->add_option("--centres", o.centres, "multicentre: number of centres");
  simulate->add_option("--n-per-centre", o.n_per_centre, "multicentre: rows per centre");
  simulate->add_option("--tau", o.tau, "multicentre: planted treatment effect");

  auto* serve_cmd = cli.add_subcommand("serve", "JSON-over-HTTP service over the loaded inputs");
  inputs(serve_cmd);
  serve_cmd->add_option("--port", o.port, "TCP port")->capture_default_str();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (serve_cmd->parsed()) return serve(o);
    for (auto* sub : {identify, positivity, match, monitor, simulate}) {
      if (sub->parsed()) return run_command(sub->get_name(), o, *sub);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
