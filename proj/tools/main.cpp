#include <iostream>

#include "CLI11.hpp"
#include "stgcgrn/app/commands.hpp"

namespace app = stgcgrn::app;

namespace {

void add_overrides(CLI::App* cmd, app::Overrides& o) {
  cmd->add_option("--ablation", o.ablation, "full, no_pre, no_adp, no_window, no_period or a '+' list");
  cmd->add_option("--order", o.order, "attention_then_dgc or dgc_then_attention");
  cmd->add_option("--seeds", o.seeds, "seed list, e.g. --seeds 1,2,3")->delimiter(',');
  cmd->add_option("--jobs", o.jobs, "worker threads for seeds or grid cells")->check(CLI::PositiveNumber);
  cmd->add_option("--max-epochs", o.max_epochs)->check(CLI::PositiveNumber);
  cmd->add_option("--max-steps", o.max_steps, "optimizer step cap per seed (0 = none)");
  cmd->add_option("--patience", o.patience)->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", o.batch_size)->check(CLI::PositiveNumber);
  cmd->add_option("--heads", o.n_head)->check(CLI::PositiveNumber);
  cmd->add_option("--d-h", o.d_h)->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.learning_rate)->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Spatio-temporal graph forecasting with periodic attention"};
  cli.require_subcommand(1);

  app::GenDataOptions gen;
  auto* gen_cmd = cli.add_subcommand("gen-data", "write a synthetic periodic dataset");
  gen_cmd->add_option("--nodes", gen.synth.n_nodes)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--days", gen.synth.days)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--ld", gen.synth.samples_per_day, "samples per day")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--shift", gen.synth.shift_max, "max daily phase shift in steps")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--noise", gen.synth.noise, "noise std relative to amplitude")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--weekly-amp", gen.synth.weekly_amp)->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seed", gen.synth.seed);
  gen_cmd->add_option("--out", gen.out_dir, "output directory");

  app::RunOptions run;
  auto* train_cmd = cli.add_subcommand("train", "train one configuration over its seeds");
  train_cmd->add_option("config", run.config, "JSON config or run manifest")->required();
  train_cmd->add_option("--out", run.out_dir, "output directory");
  add_overrides(train_cmd, run.overrides);

  app::EvalOptions eval;
  std::string eval_report;
  auto* eval_cmd = cli.add_subcommand("eval", "test-split metrics for a checkpoint");
  eval_cmd->add_option("config", eval.config, "JSON config or run manifest")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  eval_cmd->add_option("--report", eval_report, "write the report here instead of stdout");
  add_overrides(eval_cmd, eval.overrides);

  app::GradcheckOptions gc;
  std::string fault = "none", gc_report;
  auto* gc_cmd = cli.add_subcommand("gradcheck", "finite-difference checks of ops and the toy model");
  gc_cmd->add_option("--inject-fault", fault, "test mode: none, tanh or matmul")
      ->check(CLI::IsMember({"none", "tanh", "matmul"}));
  gc_cmd->add_option("--seed", gc.seed);
  gc_cmd->add_option("--probes", gc.probes, "sampled model parameters")->check(CLI::Range(20, 100000));
  gc_cmd->add_option("--report", gc_report);

  app::RunOptions exp;
  std::string kind;
  auto* exp_cmd = cli.add_subcommand("experiment", "run an ablation, multihead or order grid");
  exp_cmd->add_option("kind", kind)->required()->check(CLI::IsMember({"ablation", "multihead", "order"}));
  exp_cmd->add_option("config", exp.config, "JSON config or run manifest")->required();
  exp_cmd->add_option("--out", exp.out_dir, "output directory");
  add_overrides(exp_cmd, exp.overrides);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? app::kOk : app::kUsage;
  }

  try {
    if (*gen_cmd) {
      app::cmd_gen_data(gen, std::cout);
    } else if (*train_cmd) {
      app::cmd_train(run, std::cout);
    } else if (*eval_cmd) {
      if (!eval_report.empty()) eval.report = eval_report;
      app::cmd_eval(eval, std::cout);
    } else if (*gc_cmd) {
      gc.fault = fault == "tanh"     ? stgcgrn::debug::Fault::negate_tanh_backward
                 : fault == "matmul" ? stgcgrn::debug::Fault::negate_matmul_backward
                                     : stgcgrn::debug::Fault::none;
      if (!gc_report.empty()) gc.report = gc_report;
      app::cmd_gradcheck(gc, std::cout);
    } else if (*exp_cmd) {
      app::cmd_experiment(kind, exp, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return app::exit_code_for(e);
  }
  return app::kOk;
}
