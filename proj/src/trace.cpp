#include "hmeqa/trace.hpp"

#include <cmath>
#include <cstdio>

#include "hmeqa/errors.hpp"

namespace hmeqa {

using nlohmann::json;

namespace {

const std::vector<double>& checked(const std::vector<double>& weights, const char* what) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ContractError(std::string(what) + " has a negative or NaN weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ContractError(std::string(what) + " sums to " + std::to_string(sum));
  return weights;
}

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

}  // namespace

json trace_document(const SampleRecord& sample, const ModelConfig& config, const ModelTrace& trace,
                    std::size_t predicted) {
  json doc;
  doc["schema_version"] = kTraceSchemaVersion;
  doc["sample_id"] = sample.id;
  doc["variant"] = std::string(to_string(config.variant));
  doc["task"] = std::string(to_string(sample.task));
  doc["predicted"] = predicted;
  doc["answer"] = sample.answer;
  doc["correct"] = predicted == sample.answer;
  doc["valid_frames"] = sample.valid_frames;
  doc["question_length"] = sample.question.size();

  json reasoning = json::array();
  for (std::size_t l = 0; l < trace.fusion.size(); ++l) {
    const auto& f = trace.fusion[l];
    reasoning.push_back({{"step", l + 1},
                         {"gamma_video", checked(f.gamma_video, "gamma_video")},
                         {"gamma_question", checked(f.gamma_question, "gamma_question")},
                         {"phi", checked(f.phi, "phi")}});
  }
  doc["reasoning"] = reasoning;

  json visual = json::array();
  for (std::size_t t = 0; t < trace.visual.size(); ++t) {
    const auto& v = trace.visual[t];
    visual.push_back({{"frame", t},
                      {"alpha_motion", checked(v.alpha_motion, "alpha_motion")},
                      {"alpha_appearance", checked(v.alpha_appearance, "alpha_appearance")},
                      {"epsilon", checked(v.epsilon, "epsilon")},
                      {"beta", checked(v.beta, "beta")}});
  }
  doc["visual_memory"] = visual;

  json question = json::array();
  for (std::size_t t = 0; t < trace.question.size(); ++t) {
    const auto& q = trace.question[t];
    question.push_back({{"word", t}, {"alpha", checked(q.alpha, "alpha")}, {"beta", checked(q.beta, "beta")}});
  }
  doc["question_memory"] = question;

  json final_attention = json::array();
  for (const auto& a : trace.final_attention) final_attention.push_back(checked(a, "final_attention"));
  doc["final_attention"] = final_attention;
  return doc;
}

std::string trace_svg(const json& doc) {
  constexpr int kCell = 24, kGap = 40, kLabel = 60;
  const auto& steps = doc.at("reasoning");
  const std::size_t rows = steps.size();
  const std::size_t frames = rows ? steps[0].at("gamma_video").size() : 0;
  const std::size_t words = rows ? steps[0].at("gamma_question").size() : 0;
  const int width = kLabel + static_cast<int>(frames + words) * kCell + kGap + 10;
  const int height = 30 + static_cast<int>(rows) * kCell + 10;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\" font-family=\"monospace\" font-size=\"11\">\n";
  svg += "<text x=\"" + std::to_string(kLabel) + "\" y=\"14\">frames</text>\n";
  svg += "<text x=\"" + std::to_string(kLabel + static_cast<int>(frames) * kCell + kGap) + "\" y=\"14\">words</text>\n";
  auto grid = [&](const char* key, const char* cls, int x0) {
    for (std::size_t l = 0; l < rows; ++l) {
      const auto& w = steps[l].at(key);
      for (std::size_t c = 0; c < w.size(); ++c) {
        const int x = x0 + static_cast<int>(c) * kCell, y = 20 + static_cast<int>(l) * kCell;
        svg += "<rect class=\"" + std::string(cls) + "\" data-step=\"" + std::to_string(l + 1) + "\" data-index=\"" +
               std::to_string(c) + "\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
               std::to_string(kCell - 1) + "\" height=\"" + std::to_string(kCell - 1) +
               "\" fill=\"#1f4e79\" fill-opacity=\"" + fmt("%.6f", w[c].get<double>()) + "\"/>\n";
      }
    }
  };
  for (std::size_t l = 0; l < rows; ++l) {
    svg += "<text x=\"4\" y=\"" + std::to_string(36 + static_cast<int>(l) * kCell) + "\">step " +
           std::to_string(l + 1) + "</text>\n";
  }
  grid("gamma_video", "frame", kLabel);
  grid("gamma_question", "word", kLabel + static_cast<int>(frames) * kCell + kGap);
  svg += "</svg>\n";
  return svg;
}

template <typename T>
json trace_sample(const Model<T>& model, const SampleRecord& sample) {
  validate_sample(sample, model.config());
  Graph<T> g;
  auto r = model.forward(g, sample);
  return trace_document(sample, model.config(), r.trace, r.prediction);
}

template json trace_sample(const Model<float>&, const SampleRecord&);
template json trace_sample(const Model<double>&, const SampleRecord&);

}  // namespace hmeqa
