// hda — batch front door for the heterogeneous domain adaptation toolkit.
#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "hda/error.hpp"
#include "hda/json_io.hpp"
#include "hda/pipeline.hpp"

using nlohmann::json;
namespace pl = hda::pipeline;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::size_t jobs = 1;
  bool quiet = false;
};

// Flags override the file; the merged document is what gets validated and
// snapshotted.
pl::RunConfig resolve(const Flags& f) {
  json j = f.config.empty() ? json::object() : hda::read_json_file(f.config);
  if (!j.is_object()) hda::fail(hda::ErrorKind::config, "config root must be an object", "/");
  if (f.seed) j["seed"] = *f.seed;
  if (f.preset) j["preset"] = *f.preset;
  return pl::RunConfig::from_json(j);
}

int report_error(const hda::Error& e) {
  json err = {{"kind", std::string(hda::to_string(e.kind()))}, {"message", e.what()}};
  if (!e.path().empty()) err["path"] = e.path();
  std::cerr << json{{"error", err}}.dump() << '\n';
  return hda::exit_code(e.kind());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous domain adaptation toolkit (DBACS, PCA/CCA + CORAL baselines)"};
  app.require_subcommand(1);
  Flags f;
  std::string method;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run configuration (defaults apply to missing keys)")->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "run directory")->required();
    sub->add_option("--seed", f.seed, "master seed (overrides the config)");
    sub->add_option("--preset", f.preset, "architecture preset (overrides the config)");
    sub->add_option("--jobs", f.jobs, "parallel CV folds")->check(CLI::Range(1, 256));
    sub->add_flag("-q,--quiet", f.quiet, "no progress output");
  };

  using Cmd = std::function<void(const pl::RunDir&, const pl::RunConfig&, const pl::CommandOptions&)>;
  std::vector<std::pair<CLI::App*, Cmd>> commands;
  auto add = [&](const char* name, const char* help, Cmd fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    common(sub);
    commands.emplace_back(sub, std::move(fn));
    return sub;
  };
  add("gen-data", "generate the synthetic source/target pair", pl::cmd_gen_data);
  add("preprocess", "clean and normalize the raw datasets", pl::cmd_preprocess);
  add("train", "train one method on every fold",
      [&](const pl::RunDir& d, const pl::RunConfig& c, const pl::CommandOptions& o) { pl::cmd_train(d, c, method, o); })
      ->add_option("method", method, "dbacs | pca-coral | cca")
      ->required()
      ->check(CLI::IsMember({"dbacs", "pca-coral", "cca"}));
  add("eval", "evaluate every fold and aggregate the tables", pl::cmd_eval);
  add("match", "equipment matching report on one fold", pl::cmd_match);
  add("report", "render tables and plots", pl::cmd_report);
  add("pipeline", "gen-data, preprocess, train (all), eval, match, report", pl::cmd_pipeline);

  std::string schema_out;
  CLI::App* schema = app.add_subcommand("schema", "print the configuration JSON Schema");
  schema->add_option("--out", schema_out, "write to a file instead of stdout");
  schema->add_flag("-q,--quiet", f.quiet, "accepted for symmetry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hda::exit_code(hda::ErrorKind::usage);
  }

  try {
    if (schema->parsed()) {
      const json s = pl::config_schema();
      if (schema_out.empty()) std::cout << s.dump(2) << '\n';
      else hda::write_json_file(schema_out, s);
      return 0;
    }
    for (auto& [sub, fn] : commands) {
      if (!sub->parsed()) continue;
      const pl::RunConfig cfg = resolve(f);
      const pl::RunDir dir{f.out};
      fn(dir, cfg, pl::CommandOptions{f.jobs, f.quiet});
      if (!f.quiet) std::fprintf(stderr, "done: %s\n", dir.metrics().c_str());
      return 0;
    }
  } catch (const hda::Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
  return 0;
}
