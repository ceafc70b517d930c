#include "hmeqa/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "hmeqa/checkpoint.hpp"
#include "hmeqa/errors.hpp"
#include "hmeqa/optimizer.hpp"

namespace hmeqa {

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
std::vector<Tensor<T>> snapshot(const ParameterSet<T>& params) {
  std::vector<Tensor<T>> values;
  for (const auto& p : params) values.push_back(p.value);
  return values;
}

template <typename T>
void restore(ParameterSet<T>& params, const std::vector<Tensor<T>>& values) {
  std::size_t k = 0;
  for (auto& p : params) p.value = values[k++];
}

}  // namespace

std::string format_metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::string out = "epoch,split,loss,accuracy\n";
  for (const auto& m : metrics) {
    out += std::to_string(m.epoch) + "," + m.split + "," + format_double(m.loss) + "," + format_double(m.accuracy) + "\n";
  }
  return out;
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write metrics '" + path + "'");
  out << format_metrics_csv(metrics);
}

template <typename T>
Evaluation evaluate(const Model<T>& model, const Dataset& data) {
  Evaluation e;
  double loss = 0.0;
  for (const auto& s : data) {
    Graph<T> g;
    auto r = model.forward(g, s);
    loss += static_cast<double>(r.loss.value()[0]);
    e.predictions.push_back(r.prediction);
    if (r.prediction == s.answer) ++e.correct;
  }
  e.total = data.size();
  if (e.total) {
    e.loss = loss / static_cast<double>(e.total);
    e.accuracy = static_cast<double>(e.correct) / static_cast<double>(e.total);
  }
  return e;
}

template <typename T>
TrainResult train(Model<T>& model, const Dataset& train_set, const Dataset& validation_set,
                  const TrainOptions& options) {
  const auto& config = model.config();
  if (train_set.empty()) throw DatasetError("training set is empty");
  for (const auto& s : train_set) validate_sample(s, config);
  for (const auto& s : validation_set) validate_sample(s, config);

  auto& params = model.params();
  Adam<T> adam(params, {config.learning_rate, 0.9, 0.999, 1e-8});
  Rng shuffle(config.seed);
  TrainResult result;
  std::vector<Tensor<T>> best;
  std::size_t batch_id = 0;
  const std::size_t b = config.batch_size;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto order = shuffle.permutation(train_set.size());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += b, ++batch_id) {
      const std::size_t end = std::min(order.size(), start + b);
      params.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = train_set[order[i]];
        try {
          Graph<T> g;
          auto r = model.forward(g, s);
          const double loss = static_cast<double>(r.loss.value()[0]);
          if (!std::isfinite(loss)) throw NumericError("loss is " + std::to_string(loss));
          loss_sum += loss;
          if (r.prediction == s.answer) ++correct;
          g.backward(r.loss);
        } catch (const NumericError& e) {
          throw DivergenceError("training diverged on sample '" + s.id + "' in batch " + std::to_string(batch_id) +
                                    ": " + e.what(),
                                batch_id);
        }
      }
      const T inv = static_cast<T>(1.0 / static_cast<double>(end - start));
      for (auto& p : params)
        for (auto& gr : p.grad.data()) gr *= inv;
      clip_gradients(params, config.clip_norm);
      adam.step(params);
    }
    const double n = static_cast<double>(train_set.size());
    EpochMetrics tm{epoch, "train", loss_sum / n, static_cast<double>(correct) / n};
    result.metrics.push_back(tm);
    result.epochs_run = epoch;

    bool improved = false;
    double val_acc = tm.accuracy;
    if (!validation_set.empty()) {
      auto v = evaluate(model, validation_set);
      result.metrics.push_back({epoch, "validation", v.loss, v.accuracy});
      val_acc = v.accuracy;
      improved = v.accuracy > result.best_validation_accuracy;
    } else {
      improved = true;
    }
    if (improved) {
      result.best_validation_accuracy = val_acc;
      result.best_epoch = epoch;
      best = snapshot(params);
      if (options.checkpoint_path) save_checkpoint(params, config, *options.checkpoint_path);
    }
    if (options.log) {
      *options.log << "epoch " << epoch << " train_loss " << tm.loss << " train_acc " << tm.accuracy;
      if (!validation_set.empty()) *options.log << " val_acc " << val_acc;
      *options.log << '\n';
    }
    if (options.metrics_path) write_metrics_csv(result.metrics, *options.metrics_path);
    if (options.stop_at_accuracy && tm.accuracy >= *options.stop_at_accuracy && val_acc >= *options.stop_at_accuracy) {
      break;
    }
    if (options.stop_when && options.stop_when(result)) break;
  }
  if (options.restore_best && !best.empty()) restore(params, best);
  return result;
}

template TrainResult train(Model<float>&, const Dataset&, const Dataset&, const TrainOptions&);
template TrainResult train(Model<double>&, const Dataset&, const Dataset&, const TrainOptions&);
template Evaluation evaluate(const Model<float>&, const Dataset&);
template Evaluation evaluate(const Model<double>&, const Dataset&);

}  // namespace hmeqa
