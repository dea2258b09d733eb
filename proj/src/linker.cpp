#include "lbn/linker.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "lbn/error.hpp"

namespace lbn {

using nlohmann::json;

ExportSet select_export_set(const TreeBN& bn, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > bn.size()) {
    throw ArgumentError("k=" + std::to_string(k) + " out of range for network '" + bn.relation + "' with " +
                        std::to_string(bn.size()) + " nodes");
  }
  ExportSet exports{bn.relation, {}, k};
  if (k == 0) return exports;
  const auto kids = bn.children();
  std::vector<int> frontier{bn.root};
  while (exports.attributes.size() < static_cast<std::size_t>(k)) {
    auto best = frontier.begin();
    for (auto it = frontier.begin(); it != frontier.end(); ++it) {
      const auto w = bn.edge_weight[static_cast<std::size_t>(*it)];
      const auto bw = bn.edge_weight[static_cast<std::size_t>(*best)];
      if (w > bw || (w == bw && bn.nodes[static_cast<std::size_t>(*it)] < bn.nodes[static_cast<std::size_t>(*best)])) {
        best = it;
      }
    }
    const int chosen = *best;
    frontier.erase(best);
    exports.attributes.push_back(bn.nodes[static_cast<std::size_t>(chosen)]);
    for (const int c : kids[static_cast<std::size_t>(chosen)]) frontier.push_back(c);
  }
  return exports;
}

const EncodedColumn& AugmentedRelation::column(const std::string& name) const {
  const auto it = imported.find(name);
  if (it != imported.end()) return it->second;
  return base->column(name);
}

namespace {

std::vector<std::pair<std::string, EncodedColumn>> copy_matched(std::span<const std::int32_t> matches,
                                                                const std::string& fk,
                                                                const AugmentedRelation& child,
                                                                const ExportSet& exports) {
  std::vector<std::pair<std::string, EncodedColumn>> out;
  for (const auto& attribute : exports.attributes) {
    const auto& source = child.column(attribute);
    EncodedColumn column{source.dictionary, std::vector<std::int32_t>(matches.size())};
    const auto null_code = source.null_code();
    for (std::size_t r = 0; r < matches.size(); ++r) {
      const auto m = matches[r];
      column.codes[r] = m < 0 ? null_code : source.codes[static_cast<std::size_t>(m)];
    }
    out.emplace_back(fk + "." + attribute, std::move(column));
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, EncodedColumn>> import_columns(const RelationData& parent, const std::string& fk,
                                                                  const AugmentedRelation& child,
                                                                  const ExportSet& exports) {
  if (exports.attributes.empty()) return {};
  const auto matches = resolve_foreign_key(parent, fk, *child.base);
  return copy_matched(matches, fk, child, exports);
}

RelationData materialize_imports(RelationData parent, const RelationData& child, const std::string& fk,
                                 const ExportSet& exports) {
  AugmentedRelation view{&child, {}};
  for (auto& [name, column] : import_columns(parent, fk, view, exports)) {
    parent.attribute_order.push_back(name);
    parent.columns.emplace(name, std::move(column));
  }
  return parent;
}

// ---------------------------------------------------------------------------
// LinkedModel

const Network& LinkedModel::network(const std::string& relation) const {
  const auto it = networks.find(relation);
  if (it == networks.end()) throw ModelError("model has no network for relation '" + relation + "'");
  return it->second;
}

const Link* LinkedModel::find_link(const std::string& parent, const std::string& fk) const {
  for (const auto& l : links) {
    if (l.parent == parent && l.fk == fk) return &l;
  }
  return nullptr;
}

const Dictionary& LinkedModel::dictionary(const std::string& relation, const std::string& attribute) const {
  const auto it = dictionaries.find(relation + "." + attribute);
  if (it == dictionaries.end()) throw ModelError("model has no dictionary for '" + relation + "." + attribute + "'");
  return *it->second;
}

std::uint64_t LinkedModel::join_card(const std::string& parent, const std::string& fk) const {
  const auto it = join_cards.find(parent + "." + fk);
  if (it == join_cards.end()) throw ModelError("model has no join cardinality for '" + parent + "." + fk + "'");
  return it->second;
}

std::uint64_t LinkedModel::row_count(const std::string& relation) const {
  const auto it = row_counts.find(relation);
  if (it == row_counts.end()) throw ModelError("model has no row count for '" + relation + "'");
  return it->second;
}

void LinkedModel::check() const {
  for (const auto& [name, net] : networks) {
    net.bn.check();
    if (net.origins.size() != net.bn.size()) throw InternalError("network '" + name + "': origins out of sync");
    for (const auto& o : net.origins) {
      if (!dictionaries.count(o.dictionary_key)) {
        throw InternalError("network '" + name + "': unknown dictionary '" + o.dictionary_key + "'");
      }
    }
  }
  for (const auto& link : links) {
    const auto& parent = network(link.parent).bn;
    const auto& child_net = network(link.child);
    const auto& child = child_net.bn;
    std::set<std::string> exported;
    for (const auto& [child_node, parent_node] : link.shared) {
      const int c = child.index_of(child_node);
      const int p = parent.index_of(parent_node);
      if (c < 0 || p < 0) {
        throw InternalError("link " + link.parent + "." + link.fk + ": shared node missing on one side");
      }
      if (network(link.parent).origins[static_cast<std::size_t>(p)].dictionary_key !=
          child_net.origins[static_cast<std::size_t>(c)].dictionary_key) {
        throw InternalError("link " + link.parent + "." + link.fk + ": dictionaries differ for '" + child_node + "'");
      }
      exported.insert(child_node);
    }
    // Parent closure inside the child network.
    for (const auto& node : exported) {
      const int c = child.index_of(node);
      const int up = child.parent[static_cast<std::size_t>(c)];
      if (up >= 0 && !exported.count(child.nodes[static_cast<std::size_t>(up)])) {
        throw InternalError("link " + link.parent + "." + link.fk + ": export set is not parent-closed");
      }
    }
    if (!link.shared.empty() && link.shared.front().first != child.nodes[static_cast<std::size_t>(child.root)]) {
      throw InternalError("link " + link.parent + "." + link.fk + ": export set does not start at the root");
    }
  }
}

namespace {

bool same_table(const std::shared_ptr<const ConditionalTable>& a, const std::shared_ptr<const ConditionalTable>& b) {
  if (!a || !b) return !a && !b;
  return *a == *b;
}

}  // namespace

bool LinkedModel::operator==(const LinkedModel& other) const {
  if (k != other.k || schema_fingerprint != other.schema_fingerprint || join_cards != other.join_cards ||
      row_counts != other.row_counts || networks.size() != other.networks.size() ||
      dictionaries.size() != other.dictionaries.size() || links.size() != other.links.size()) {
    return false;
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto &a = links[i], &b = other.links[i];
    if (a.parent != b.parent || a.fk != b.fk || a.child != b.child || a.k != b.k || a.shared != b.shared) return false;
  }
  for (const auto& [key, dict] : dictionaries) {
    const auto it = other.dictionaries.find(key);
    if (it == other.dictionaries.end() || !(*dict == *it->second)) return false;
  }
  for (const auto& [name, net] : networks) {
    const auto it = other.networks.find(name);
    if (it == other.networks.end()) return false;
    const auto &a = net.bn, &b = it->second.bn;
    if (a.nodes != b.nodes || a.root != b.root || a.parent != b.parent || a.edge_weight != b.edge_weight ||
        !(a.root_marginal == b.root_marginal) || a.domain_sizes != b.domain_sizes) {
      return false;
    }
    for (std::size_t i = 0; i < a.cpts.size(); ++i) {
      if (!same_table(a.cpts[i], b.cpts[i])) return false;
    }
    for (std::size_t i = 0; i < net.origins.size(); ++i) {
      const auto &x = net.origins[i], &y = it->second.origins[i];
      if (x.dictionary_key != y.dictionary_key || x.fk != y.fk || x.source != y.source) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Construction

LinkedModel build_linked(const Catalog& catalog, const LinkOptions& options) {
  if (options.k < 0) throw ArgumentError("k must be non-negative, got " + std::to_string(options.k));
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  LinkedModel model;
  model.k = options.k;
  model.schema_fingerprint = catalog.schema.fingerprint();

  std::map<std::string, AugmentedRelation> augmented;
  for (const auto& name : topological_order(catalog.schema)) {
    const auto relation_start = clock::now();
    const auto& decl = catalog.schema.relation(name);
    const auto& data = catalog.relation(name);
    if (data.row_count == 0) throw DataError("cannot build a network for empty relation '" + name + "'");
    model.row_counts[name] = data.row_count;

    AugmentedRelation& aug = augmented[name];
    aug.base = &data;
    std::vector<NamedColumn> columns;
    std::vector<NodeOrigin> origins;
    for (const auto& attribute : data.attribute_order) {
      columns.push_back({attribute, &data.column(attribute)});
      const std::string key = name + "." + attribute;
      origins.push_back({key, "", ""});
      model.dictionaries.emplace(key, data.column(attribute).dictionary);
    }
    std::vector<char> core(columns.size(), 1);
    std::vector<std::pair<int, int>> fixed;

    for (const auto& fk : decl.foreign_keys) {
      const auto& child_net = model.networks.at(fk.references);
      const int requested = options.use_schema_overrides && fk.k ? *fk.k : options.k;
      const int k = std::clamp(requested, 0, static_cast<int>(child_net.bn.size()));
      const auto exports = select_export_set(child_net.bn, k);
      const auto& child = catalog.relation(fk.references);

      Link link{name, fk.attribute, fk.references, k, {}};
      std::uint64_t matched_rows = 0;
      if (exports.attributes.empty()) {
        // Nothing to copy: count matches per FK code instead of per row.
        const auto& fk_column = data.key_column(fk.attribute);
        const auto& values = fk_column.dictionary->values();
        std::vector<char> matched(values.size() + 1, 0);
        for (std::size_t c = 0; c < values.size(); ++c) matched[c] = child.pk_index.count(values[c]) ? 1 : 0;
        for (const auto code : fk_column.codes) matched_rows += matched[static_cast<std::size_t>(code)];
      } else {
        const auto matches = resolve_foreign_key(data, fk.attribute, child);
        for (const auto m : matches) matched_rows += m >= 0 ? 1 : 0;
        auto imported = copy_matched(matches, fk.attribute, augmented.at(fk.references), exports);
        std::map<std::string, int> column_of;  // child node -> column index here
        for (std::size_t i = 0; i < imported.size(); ++i) {
          const auto& source = exports.attributes[i];
          const int source_node = child_net.bn.index_of(source);
          // Below the exported root an import keeps its parent from the
          // child network; only the root's attachment is searched for.
          if (const int up = child_net.bn.parent[static_cast<std::size_t>(source_node)]; up >= 0) {
            fixed.emplace_back(static_cast<int>(columns.size()), column_of.at(child_net.bn.nodes[static_cast<std::size_t>(up)]));
          }
          column_of[source] = static_cast<int>(columns.size());
          auto origin = child_net.origins[static_cast<std::size_t>(source_node)];
          origin.fk = fk.attribute;
          origin.source = source;
          origins.push_back(std::move(origin));
          link.shared.emplace_back(source, imported[i].first);
          const auto [it, inserted] = aug.imported.emplace(imported[i].first, std::move(imported[i].second));
          if (!inserted) throw SchemaError("imported column '" + imported[i].first + "' clashes in '" + name + "'");
          columns.push_back({it->first, &it->second});
          core.push_back(0);
        }
      }
      model.join_cards[name + "." + fk.attribute] = matched_rows;
      model.links.push_back(std::move(link));
    }

    std::unique_ptr<bool[]> core_flags(new bool[core.size()]);
    for (std::size_t i = 0; i < core.size(); ++i) core_flags[i] = core[i] != 0;
    Network net;
    net.bn = build_bn(name, std::span<const NamedColumn>(columns),
                      core.size() > data.attribute_order.size() ? std::span<const bool>(core_flags.get(), core.size())
                                                                 : std::span<const bool>{},
                      fixed);
    net.origins = std::move(origins);
    net.marginals = net.bn.node_marginals();
    net.order = net.bn.bfs_order();
    model.networks.emplace(name, std::move(net));

    const double seconds = std::chrono::duration<double>(clock::now() - relation_start).count();
    model.stats.relation_seconds[name] = seconds;
    spdlog::debug("built network for '{}' ({} nodes) in {:.3f}s", name, model.networks.at(name).bn.size(), seconds);
  }
  model.stats.total_seconds = std::chrono::duration<double>(clock::now() - start).count();
  model.check();
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json dictionary_to_json(const Dictionary& d) {
  json j{{"kind", to_string(d.kind())}, {"values", d.values()}};
  if (d.kind() == AttributeKind::kNumeric) j["bin_edges"] = d.bin_edges();
  return j;
}

std::shared_ptr<const Dictionary> dictionary_from_json(const json& j) {
  const auto kind = attribute_kind_from_string(j.at("kind").get<std::string>());
  auto values = j.at("values").get<std::vector<std::string>>();
  std::vector<double> edges;
  if (kind == AttributeKind::kNumeric) edges = j.at("bin_edges").get<std::vector<double>>();
  return std::make_shared<const Dictionary>(kind, std::move(values), std::move(edges));
}

json cpt_to_json(const ConditionalTable& t) {
  json j{{"child", t.child()},
         {"parent", t.parent()},
         {"parent_size", t.parent_size()},
         {"child_size", t.child_size()}};
  if (t.is_dense()) {
    j["layout"] = "dense";
    j["probs"] = t.dense_probs();
    std::vector<int> support(t.support().begin(), t.support().end());
    j["supported"] = support;
  } else {
    j["layout"] = "sparse";
    j["row_offsets"] = t.row_offsets();
    j["cols"] = t.cols();
    j["vals"] = t.vals();
    j["fallback"] = t.fallback();
  }
  return j;
}

ConditionalTable cpt_from_json(const json& j) {
  const auto child = j.at("child").get<std::string>();
  const auto parent = j.at("parent").get<std::string>();
  const auto parent_size = j.at("parent_size").get<std::int32_t>();
  const auto child_size = j.at("child_size").get<std::int32_t>();
  const auto layout = j.at("layout").get<std::string>();
  if (layout == "dense") {
    const auto flags = j.at("supported").get<std::vector<int>>();
    return ConditionalTable::dense(child, parent, parent_size, child_size, j.at("probs").get<std::vector<double>>(),
                                   std::vector<bool>(flags.begin(), flags.end()));
  }
  if (layout == "sparse") {
    return ConditionalTable::sparse(child, parent, parent_size, child_size,
                                    j.at("row_offsets").get<std::vector<std::uint32_t>>(),
                                    j.at("cols").get<std::vector<std::int32_t>>(),
                                    j.at("vals").get<std::vector<double>>(),
                                    j.at("fallback").get<std::vector<double>>());
  }
  throw ModelError("unknown table layout '" + layout + "'");
}

json network_to_json(const Network& net) {
  const auto& bn = net.bn;
  json nodes = json::array();
  json edges = json::array();
  json cpts = json::array();
  for (std::size_t i = 0; i < bn.size(); ++i) {
    const auto& o = net.origins[i];
    nodes.push_back({{"name", bn.nodes[i]},
                     {"dictionary", o.dictionary_key},
                     {"fk", o.fk},
                     {"source", o.source},
                     {"parent", bn.parent[i]},
                     {"weight", bn.edge_weight[i]},
                     {"domain_size", bn.domain_sizes[i]}});
    if (bn.parent[i] >= 0) {
      edges.push_back({{"child", bn.nodes[i]}, {"parent", bn.nodes[static_cast<std::size_t>(bn.parent[i])]}});
      cpts.push_back(cpt_to_json(*bn.cpts[i]));
    }
  }
  json j{{"relation", bn.relation}, {"root", bn.root}, {"nodes", nodes}, {"edges", edges}};
  j["factors"] = {{"root", {{"attribute", bn.root_marginal.attribute}, {"probs", bn.root_marginal.probs}}},
                  {"cpts", cpts}};
  return j;
}

Network network_from_json(const json& j) {
  Network net;
  auto& bn = net.bn;
  bn.relation = j.at("relation").get<std::string>();
  bn.root = j.at("root").get<int>();
  for (const auto& node : j.at("nodes")) {
    bn.nodes.push_back(node.at("name").get<std::string>());
    bn.parent.push_back(node.at("parent").get<int>());
    bn.edge_weight.push_back(node.at("weight").get<double>());
    bn.domain_sizes.push_back(node.at("domain_size").get<std::int32_t>());
    net.origins.push_back({node.at("dictionary").get<std::string>(), node.at("fk").get<std::string>(),
                           node.at("source").get<std::string>()});
  }
  bn.cpts.assign(bn.size(), nullptr);
  const auto& factors = j.at("factors");
  if (bn.root >= 0) {
    bn.root_marginal = {factors.at("root").at("attribute").get<std::string>(),
                        factors.at("root").at("probs").get<std::vector<double>>()};
  }
  for (const auto& t : factors.at("cpts")) {
    auto table = cpt_from_json(t);
    const int i = bn.index_of(table.child());
    if (i < 0 || bn.parent[static_cast<std::size_t>(i)] < 0) {
      throw ModelError("table for unknown or root node '" + table.child() + "'");
    }
    bn.cpts[static_cast<std::size_t>(i)] = std::make_shared<const ConditionalTable>(std::move(table));
  }
  return net;
}

}  // namespace

std::string serialize_model(const LinkedModel& model) {
  json j;
  j["format_version"] = LinkedModel::kFormatVersion;
  j["k"] = model.k;
  j["schema_fingerprint"] = model.schema_fingerprint;
  json dictionaries = json::object();
  for (const auto& [key, dict] : model.dictionaries) dictionaries[key] = dictionary_to_json(*dict);
  j["dictionaries"] = dictionaries;
  j["row_counts"] = model.row_counts;
  j["join_cards"] = model.join_cards;
  json networks = json::array();
  for (const auto& [name, net] : model.networks) networks.push_back(network_to_json(net));
  j["networks"] = networks;
  json links = json::array();
  for (const auto& l : model.links) {
    links.push_back({{"parent", l.parent}, {"fk", l.fk}, {"child", l.child}, {"k", l.k}, {"shared", l.shared}});
  }
  j["links"] = links;
  return j.dump();
}

LinkedModel deserialize_model(const std::string& text) {
  LinkedModel model;
  try {
    const auto j = json::parse(text);
    const int version = j.at("format_version").get<int>();
    if (version != LinkedModel::kFormatVersion) {
      throw ModelError("unsupported model format version " + std::to_string(version));
    }
    model.k = j.at("k").get<int>();
    model.schema_fingerprint = j.at("schema_fingerprint").get<std::string>();
    for (const auto& [key, d] : j.at("dictionaries").items()) model.dictionaries[key] = dictionary_from_json(d);
    model.row_counts = j.at("row_counts").get<std::map<std::string, std::uint64_t>>();
    model.join_cards = j.at("join_cards").get<std::map<std::string, std::uint64_t>>();
    for (const auto& n : j.at("networks")) {
      auto net = network_from_json(n);
      const auto name = net.bn.relation;
      model.networks.emplace(name, std::move(net));
    }
    for (const auto& l : j.at("links")) {
      model.links.push_back({l.at("parent").get<std::string>(), l.at("fk").get<std::string>(),
                             l.at("child").get<std::string>(), l.at("k").get<int>(),
                             l.at("shared").get<std::vector<std::pair<std::string, std::string>>>()});
    }
  } catch (const json::exception& e) {
    throw ModelError(std::string("corrupt model: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ModelError(std::string("corrupt model: ") + e.what());
  }
  try {
    model.check();
  } catch (const InternalError& e) {
    throw ModelError(std::string("corrupt model: ") + e.what());
  }
  for (auto& [name, net] : model.networks) {
    net.marginals = net.bn.node_marginals();
    net.order = net.bn.bfs_order();
  }
  return model;
}

void save_model(const LinkedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model to '" + path.string() + "'");
  out << serialize_model(model);
  if (!out) throw IoError("failed writing model to '" + path.string() + "'");
}

LinkedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace lbn
