#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmeqa/checkpoint.hpp"
#include "hmeqa/errors.hpp"
#include "hmeqa/grad_check.hpp"
#include "hmeqa/trace.hpp"
#include "hmeqa/trainer.hpp"

using namespace hmeqa;

namespace {

struct ConfigFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> epochs;
  bool strict_eq = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config (every ModelConfig field optional)");
    cmd->add_option("--seed", seed, "overrides config seed");
    cmd->add_option("--variant", variant, "EF, LF, VM, QM or VQ");
    cmd->add_option("--epochs", epochs, "overrides config epochs");
    cmd->add_flag("--strict-eq", strict_eq, "slot-independent read/write logits");
  }

  ModelConfig resolve() const {
    ModelConfig c = config_path.empty() ? ModelConfig{} : load_config(config_path);
    if (seed) c.seed = *seed;
    if (variant) c.variant = parse_variant(*variant);
    if (epochs) c.epochs = *epochs;
    if (strict_eq) c.strict_eq = true;
    c.validate();
    return c;
  }
};

template <typename F>
auto with_model(const ModelConfig& config, F&& f) {
  if (config.precision == Precision::kF32) {
    Model<float> m(config);
    return f(m);
  }
  Model<double> m(config);
  return f(m);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int gen_data(const ConfigFlags& flags, std::size_t samples, const std::string& out) {
  auto config = flags.resolve();
  auto data = generate_synthetic(synthetic_spec_for(config, samples), config.seed);
  write_jsonl(data, out);
  std::cout << "wrote " << data.size() << " samples to " << out << "\n";
  return 0;
}

int train_cmd(const ConfigFlags& flags, const std::string& data_path, const std::string& checkpoint,
              const std::string& metrics) {
  auto config = flags.resolve();
  auto data = read_jsonl(data_path);
  auto split = split_dataset(data, config.validation_fraction, config.seed);
  return with_model(config, [&](auto& model) {
    TrainOptions o;
    o.checkpoint_path = checkpoint;
    if (!metrics.empty()) o.metrics_path = metrics;
    o.log = &std::cerr;
    auto r = train(model, split.train, split.validation, o);
    auto tr = evaluate(model, split.train);
    std::cout << "epochs " << r.epochs_run << " best_epoch " << r.best_epoch << " train_accuracy "
              << fmt(tr.accuracy) << " validation_accuracy " << fmt(r.best_validation_accuracy) << "\n";
    return 0;
  });
}

int eval_cmd(const std::string& checkpoint, const std::string& data_path, const std::string& out) {
  auto config = read_checkpoint_config(checkpoint);
  auto data = read_jsonl(data_path);
  return with_model(config, [&](auto& model) {
    load_checkpoint(checkpoint, model.params());
    auto e = evaluate(model, data);
    std::cout << "loss " << fmt(e.loss) << " accuracy " << fmt(e.accuracy) << " correct " << e.correct << " total "
              << e.total << "\n";
    if (!out.empty()) {
      std::string csv = "id,prediction,answer\n";
      for (std::size_t i = 0; i < data.size(); ++i)
        csv += data[i].id + "," + std::to_string(e.predictions[i]) + "," + std::to_string(data[i].answer) + "\n";
      write_text(out, csv);
    }
    return 0;
  });
}

int ablate_cmd(const ConfigFlags& flags, const std::string& data_path, const std::string& test_path,
               const std::string& variants, const std::string& steps, const std::string& out) {
  const auto base = flags.resolve();
  auto data = read_jsonl(data_path);
  Dataset test = test_path.empty() ? Dataset{} : read_jsonl(test_path);
  auto split = split_dataset(data, base.validation_fraction, base.seed);

  std::vector<ModelConfig> runs;
  for (const auto& v : split_list(variants)) {
    auto c = base;
    c.variant = parse_variant(v);
    runs.push_back(c);
  }
  for (const auto& l : split_list(steps)) {
    auto c = base;
    c.variant = Variant::kVQ;
    c.reasoning_steps = std::stoul(l);
    runs.push_back(c);
  }
  for (const auto& c : runs) c.validate();

  std::string csv = "variant,reasoning_steps,epochs_run,best_epoch,train_accuracy,validation_accuracy,test_accuracy\n";
  for (const auto& c : runs) {
    std::cerr << "== " << to_string(c.variant) << " L=" << c.reasoning_steps << "\n";
    csv += with_model(c, [&](auto& model) {
      TrainOptions o;
      o.log = &std::cerr;
      auto r = train(model, split.train, split.validation, o);
      const double test_acc = test.empty() ? -1.0 : evaluate(model, test).accuracy;
      return std::string(to_string(c.variant)) + "," + std::to_string(c.reasoning_steps) + "," +
             std::to_string(r.epochs_run) + "," + std::to_string(r.best_epoch) + "," +
             fmt(evaluate(model, split.train).accuracy) + "," + fmt(r.best_validation_accuracy) + "," +
             (test.empty() ? std::string() : fmt(test_acc)) + "\n";
    });
  }
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text(out, csv);
  }
  return 0;
}

int gradcheck_cmd(const ConfigFlags& flags, const std::string& data_path) {
  auto config = flags.resolve();
  config.precision = Precision::kF64;
  SampleRecord sample = data_path.empty() ? generate_synthetic(synthetic_spec_for(config, 1), config.seed).front()
                                          : read_jsonl(data_path).at(0);
  Model<double> model(config);
  auto report = grad_check([&](Graph<double>& g) { return model.forward(g, sample).loss; }, model.params());
  std::cout << "max_relative_error " << fmt(report.max_relative_error) << " parameter " << report.worst_parameter
            << "[" << report.worst_index << "] analytic " << fmt(report.analytic) << " numeric "
            << fmt(report.numeric) << " checked " << report.checked << "\n";
  return report.max_relative_error < 1e-4 ? 0 : 2;
}

int trace_cmd(const std::string& checkpoint, const std::string& data_path, const std::string& sample_id,
              const std::string& out, bool svg) {
  auto config = read_checkpoint_config(checkpoint);
  auto data = read_jsonl(data_path);
  const SampleRecord* sample = nullptr;
  for (const auto& s : data)
    if (s.id == sample_id) sample = &s;
  if (!sample) throw DatasetError("sample '" + sample_id + "' is not in " + data_path);
  auto doc = with_model(config, [&](auto& model) {
    load_checkpoint(checkpoint, model.params());
    return trace_sample(model, *sample);
  });
  write_text(out + ".json", doc.dump(2) + "\n");
  if (svg) write_text(out + ".svg", trace_svg(doc));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous memory video question answering"};
  app.require_subcommand(1);

  ConfigFlags flags;
  std::string data, checkpoint, out, test, sample_id;
  std::string variants = "EF,LF,VM,QM,VQ", steps = "1,3,5,7";
  std::size_t samples = 512;
  bool svg = false;

  auto* gen = app.add_subcommand("gen-data", "write a synthetic flagged-slot dataset as JSON Lines");
  flags.attach(gen);
  gen->add_option("--samples", samples);
  gen->add_option("--out", out)->required();

  auto* tr = app.add_subcommand("train", "train on a dataset; writes the best checkpoint and a metric log");
  flags.attach(tr);
  tr->add_option("--data", data)->required();
  tr->add_option("--checkpoint", checkpoint)->required();
  tr->add_option("--out", out, "metric log CSV");

  auto* ev = app.add_subcommand("eval", "accuracy of a checkpoint on a dataset");
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--data", data)->required();
  ev->add_option("--out", out, "per-sample predictions CSV");

  auto* ab = app.add_subcommand("ablate", "train every variant and a reasoning-depth sweep; emits CSV");
  flags.attach(ab);
  ab->add_option("--data", data)->required();
  ab->add_option("--test", test, "held-out JSON Lines file");
  ab->add_option("--variants", variants, "comma-separated; empty to skip");
  ab->add_option("--steps", steps, "VQ reasoning depths; empty to skip");
  ab->add_option("--out", out, "results CSV (default: standard output)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
  flags.attach(gc);
  gc->add_option("--data", data, "uses the first record (default: one synthetic sample)");

  auto* trc = app.add_subcommand("trace", "export attention weights of one sample");
  trc->add_option("--checkpoint", checkpoint)->required();
  trc->add_option("--data", data)->required();
  trc->add_option("--sample", sample_id)->required();
  trc->add_option("--out", out, "writes <out>.json")->required();
  trc->add_flag("--svg", svg, "also writes <out>.svg");

  if (argc < 2) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 1;
  }

  try {
    if (*gen) return gen_data(flags, samples, out);
    if (*tr) return train_cmd(flags, data, checkpoint, out);
    if (*ev) return eval_cmd(checkpoint, data, out);
    if (*ab) return ablate_cmd(flags, data, test, variants, steps, out);
    if (*gc) return gradcheck_cmd(flags, data);
    if (*trc) return trace_cmd(checkpoint, data, sample_id, out, svg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
