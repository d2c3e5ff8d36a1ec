#include "dgbf/modelio.hpp"

#include <fmt/core.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "config_json.hpp"

namespace dgbf::modelio {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormatName = "dgbf-model";

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw ModelIOError(fmt::format("bad sample hash '{}'", s));
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') {
      v |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw ModelIOError(fmt::format("bad sample hash '{}'", s));
    }
  }
  return v;
}

// Index-valued fields use -1 for "none".
std::int64_t encode_index(std::uint32_t v) {
  return v == cart::Node::kNone ? -1 : static_cast<std::int64_t>(v);
}

std::uint32_t decode_index(const json& v, const char* field) {
  const auto i = v.get<std::int64_t>();
  if (i == -1) return cart::Node::kNone;
  if (i < 0 || i >= static_cast<std::int64_t>(cart::Node::kNone)) {
    throw ModelIOError(fmt::format("field '{}' out of range: {}", field, i));
  }
  return static_cast<std::uint32_t>(i);
}

double finite_number(const json& v, const char* field) {
  if (!v.is_number()) throw ModelIOError(fmt::format("field '{}' is not a number", field));
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ModelIOError(fmt::format("field '{}' is not finite", field));
  return d;
}

const json& member(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ModelIOError(fmt::format("missing field '{}'", key));
  }
  return obj.at(key);
}

json schema_to_json(const tabular::FeatureSchema& s) {
  json sources = json::array();
  for (const auto& src : s.sources) {
    json entry{{"name", src.name}, {"kind", tabular::to_string(src.kind)}};
    if (src.kind == tabular::ColumnKind::kCategorical) entry["categories"] = src.categories;
    sources.push_back(std::move(entry));
  }
  return json{{"target", s.target}, {"sources", sources}, {"feature_names", s.feature_names}};
}

tabular::FeatureSchema schema_from_json(const json& j) {
  tabular::FeatureSchema s;
  s.target = member(j, "target").get<std::string>();
  for (const auto& entry : member(j, "sources")) {
    tabular::SourceColumn src;
    src.name = member(entry, "name").get<std::string>();
    src.kind = tabular::column_kind_from_string(member(entry, "kind").get<std::string>());
    if (src.kind == tabular::ColumnKind::kCategorical) {
      src.categories = member(entry, "categories").get<std::vector<std::string>>();
    }
    s.sources.push_back(std::move(src));
  }
  s.feature_names = member(j, "feature_names").get<std::vector<std::string>>();
  return s;
}

json tree_to_json(const cart::Tree& tree) {
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), leaf = json::array(), count = json::array();
  for (const auto& n : tree.nodes()) {
    feature.push_back(encode_index(n.feature));
    threshold.push_back(n.threshold);
    left.push_back(encode_index(n.left));
    right.push_back(encode_index(n.right));
    leaf.push_back(encode_index(n.leaf));
    count.push_back(n.sample_count);
  }
  return json{{"n_outputs", tree.n_outputs()},
              {"feature", feature},
              {"threshold", threshold},
              {"left", left},
              {"right", right},
              {"leaf", leaf},
              {"sample_count", count},
              {"leaf_values", tree.leaf_values()}};
}

cart::Tree tree_from_json(const json& j, Index n_features) {
  const auto n_outputs = member(j, "n_outputs").get<Index>();
  const json& feature = member(j, "feature");
  const json& threshold = member(j, "threshold");
  const json& left = member(j, "left");
  const json& right = member(j, "right");
  const json& leaf = member(j, "leaf");
  const json& count = member(j, "sample_count");
  const Index n_nodes = feature.size();
  for (const json* arr : {&threshold, &left, &right, &leaf, &count}) {
    if (!arr->is_array() || arr->size() != n_nodes) {
      throw ModelIOError("tree node arrays have inconsistent lengths");
    }
  }
  std::vector<cart::Node> nodes(n_nodes);
  for (Index i = 0; i < n_nodes; ++i) {
    nodes[i].feature = decode_index(feature[i], "feature");
    nodes[i].threshold = finite_number(threshold[i], "threshold");
    nodes[i].left = decode_index(left[i], "left");
    nodes[i].right = decode_index(right[i], "right");
    nodes[i].leaf = decode_index(leaf[i], "leaf");
    nodes[i].sample_count = count[i].get<std::uint32_t>();
  }
  std::vector<double> leaf_values;
  for (const auto& v : member(j, "leaf_values")) {
    leaf_values.push_back(finite_number(v, "leaf_values"));
  }
  try {
    return cart::Tree(std::move(nodes), std::move(leaf_values), n_outputs, n_features);
  } catch (const cart::TreeError& e) {
    throw ModelIOError(fmt::format("corrupt tree: {}", e.what()));
  }
}

}  // namespace

namespace detail {

json config_to_json(const ForestConfig& c) {
  return json{{"layers", c.layers},
              {"trees", c.trees},
              {"learning_rate", c.learning_rate},
              {"tree",
               {{"max_depth", c.tree.max_depth},
                {"min_samples_split", c.tree.min_samples_split},
                {"min_samples_leaf", c.tree.min_samples_leaf}}},
              {"sampling_mode", sampling::to_string(c.sampling_mode)},
              {"p_max", c.p_max},
              {"weight_mode", to_string(c.weight_mode)},
              {"ridge", c.ridge},
              {"seed", c.seed}};
}

ForestConfig config_from_json(const json& j) {
  ForestConfig c;
  c.layers = member(j, "layers").get<Index>();
  c.trees = member(j, "trees").get<Index>();
  c.learning_rate = finite_number(member(j, "learning_rate"), "learning_rate");
  const json& tree = member(j, "tree");
  c.tree.max_depth = member(tree, "max_depth").get<Index>();
  c.tree.min_samples_split = member(tree, "min_samples_split").get<Index>();
  c.tree.min_samples_leaf = member(tree, "min_samples_leaf").get<Index>();
  c.sampling_mode = sampling::mode_from_string(member(j, "sampling_mode").get<std::string>());
  c.p_max = finite_number(member(j, "p_max"), "p_max");
  c.weight_mode = weight_mode_from_string(member(j, "weight_mode").get<std::string>());
  c.ridge = finite_number(member(j, "ridge"), "ridge");
  c.seed = member(j, "seed").get<std::uint64_t>();
  return c;
}

}  // namespace detail

std::string serialize(const ForestModel& model) {
  json layers = json::array();
  for (const auto& layer : model.layers) {
    json weights = json::array();
    for (Index t = 0; t < layer.weights.rows(); ++t) {
      auto row = layer.weights.row(t);
      weights.push_back(std::vector<double>(row.begin(), row.end()));
    }
    json hashes = json::array();
    for (auto h : layer.sample_hashes) hashes.push_back(hex64(h));
    json trees = json::array();
    for (const auto& tree : layer.trees) trees.push_back(tree_to_json(tree));
    layers.push_back(json{{"weights", weights}, {"sample_hashes", hashes}, {"trees", trees}});
  }
  json doc{{"format", kFormatName},
           {"format_version", kFormatVersion},
           {"f0", model.f0},
           {"n_features", model.n_features},
           {"config", detail::config_to_json(model.config)},
           {"schema", schema_to_json(model.schema)},
           {"layers", layers}};
  return doc.dump(1) + "\n";
}

ForestModel deserialize(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelIOError(fmt::format("model parse error at byte {}: {}", e.byte, e.what()));
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kFormatName) {
      throw ModelIOError("not a dgbf model file");
    }
    const auto version = member(doc, "format_version").get<int>();
    if (version != kFormatVersion) {
      throw ModelIOError(fmt::format("unsupported format_version {} (this build reads {})",
                                     version, kFormatVersion));
    }
    ForestModel model;
    model.f0 = finite_number(member(doc, "f0"), "f0");
    model.n_features = member(doc, "n_features").get<Index>();
    model.config = detail::config_from_json(member(doc, "config"));
    model.config.validate();
    model.schema = schema_from_json(member(doc, "schema"));
    if (!model.schema.feature_names.empty() &&
        model.schema.feature_names.size() != model.n_features) {
      throw ModelIOError("schema feature count disagrees with n_features");
    }
    const Index t_count = model.config.trees;
    const json& layers = member(doc, "layers");
    if (!layers.is_array() || layers.size() != model.config.layers) {
      throw ModelIOError(fmt::format("expected {} layers, found {}", model.config.layers,
                                     layers.is_array() ? layers.size() : 0));
    }
    for (Index l = 0; l < layers.size(); ++l) {
      const json& lj = layers[l];
      Layer layer;
      const json& trees = member(lj, "trees");
      const json& weights = member(lj, "weights");
      const json& hashes = member(lj, "sample_hashes");
      if (trees.size() != t_count || weights.size() != t_count || hashes.size() != t_count) {
        throw ModelIOError(fmt::format("layer {}: expected {} trees, weight rows and hashes", l,
                                       t_count));
      }
      layer.weights = Matrix(t_count, t_count);
      for (Index t = 0; t < t_count; ++t) {
        if (weights[t].size() != t_count) {
          throw ModelIOError(fmt::format("layer {}: weight row {} has wrong length", l, t));
        }
        for (Index k = 0; k < t_count; ++k) {
          layer.weights(t, k) = finite_number(weights[t][k], "weights");
        }
        cart::Tree tree = tree_from_json(trees[t], model.n_features);
        if (tree.n_outputs() != t_count) {
          throw ModelIOError(fmt::format("layer {}: tree {} has {} outputs, expected {}", l, t,
                                         tree.n_outputs(), t_count));
        }
        layer.trees.push_back(std::move(tree));
        layer.sample_hashes.push_back(parse_hex64(hashes[t].get<std::string>()));
      }
      model.layers.push_back(std::move(layer));
    }
    return model;
  } catch (const json::exception& e) {
    throw ModelIOError(fmt::format("corrupt model file: {}", e.what()));
  } catch (const FitError& e) {
    throw ModelIOError(fmt::format("corrupt model config: {}", e.what()));
  } catch (const cart::TreeError& e) {
    throw ModelIOError(fmt::format("corrupt model config: {}", e.what()));
  } catch (const tabular::DataError& e) {
    throw ModelIOError(fmt::format("corrupt model schema: {}", e.what()));
  } catch (const std::invalid_argument& e) {
    throw ModelIOError(fmt::format("corrupt model file: {}", e.what()));
  }
}

void save(const ForestModel& model, const std::filesystem::path& path) {
  const std::string text = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelIOError(fmt::format("cannot open '{}' for writing", path.string()));
  out << text;
  out.flush();
  if (!out) throw ModelIOError(fmt::format("write to '{}' failed", path.string()));
}

ForestModel load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelIOError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize(buffer.str());
}

}  // namespace dgbf::modelio
