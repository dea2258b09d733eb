#include "lbn/query.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lbn/error.hpp"

namespace lbn {

using nlohmann::json;

std::string to_string(PredicateOp op) {
  switch (op) {
    case PredicateOp::kEq:
      return "eq";
    case PredicateOp::kIn:
      return "in";
    case PredicateOp::kRange:
      return "range";
  }
  return "eq";
}

namespace {

PredicateOp op_from_string(const std::string& text) {
  if (text == "eq") return PredicateOp::kEq;
  if (text == "in") return PredicateOp::kIn;
  if (text == "range") return PredicateOp::kRange;
  throw QueryError("unknown predicate op '" + text + "'");
}

std::optional<double> to_number(const std::string& text) {
  double v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || std::isnan(v)) return std::nullopt;
  return v;
}

std::string scalar_text(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number() || j.is_boolean()) return j.dump();
  throw QueryError("predicate value must be a string or number");
}

}  // namespace

Query Query::canonical() const {
  Query q = *this;
  std::sort(q.relations.begin(), q.relations.end());
  std::sort(q.joins.begin(), q.joins.end());
  for (auto& p : q.predicates) {
    if (p.op == PredicateOp::kIn) {
      std::sort(p.values.begin(), p.values.end());
      p.values.erase(std::unique(p.values.begin(), p.values.end()), p.values.end());
    }
  }
  std::sort(q.predicates.begin(), q.predicates.end());
  q.predicates.erase(std::unique(q.predicates.begin(), q.predicates.end()), q.predicates.end());
  return q;
}

bool Query::operator==(const Query& other) const {
  return relations == other.relations && joins == other.joins && predicates == other.predicates;
}

const std::string& join_child(const JoinEdge& join, const Schema& schema) {
  const auto* rel = schema.find_relation(join.parent);
  if (rel == nullptr) throw QueryError("unknown relation '" + join.parent + "' in join");
  const auto* fk = rel->find_foreign_key(join.fk);
  if (fk == nullptr) throw QueryError("'" + join.parent + "." + join.fk + "' is not a foreign key");
  return fk->references;
}

void validate_query(const Query& query, const Schema& schema) {
  if (query.relations.empty()) throw QueryError("query has no relations");
  std::set<std::string> included;
  for (const auto& r : query.relations) {
    if (schema.find_relation(r) == nullptr) throw QueryError("unknown relation '" + r + "'");
    if (!included.insert(r).second) throw QueryError("relation '" + r + "' listed twice");
  }
  std::set<JoinEdge> seen;
  std::map<std::string, std::string> component;  // union-find over names
  for (const auto& r : query.relations) component[r] = r;
  auto find = [&](std::string x) {
    while (component[x] != x) x = component[x];
    return x;
  };
  for (const auto& j : query.joins) {
    if (!included.count(j.parent)) throw QueryError("join from relation '" + j.parent + "' not in the query");
    const auto& child = join_child(j, schema);
    if (!included.count(child)) {
      throw QueryError("join '" + j.parent + "." + j.fk + "' references '" + child + "', which is not in the query");
    }
    if (!seen.insert(j).second) throw QueryError("join '" + j.parent + "." + j.fk + "' listed twice");
    const auto a = find(j.parent), b = find(child);
    if (a == b) throw QueryError("join graph has a cycle at '" + j.parent + "." + j.fk + "'");
    component[a] = b;
  }
  if (query.joins.size() + 1 != query.relations.size()) throw QueryError("join graph is disconnected");

  for (const auto& p : query.predicates) {
    if (!included.count(p.relation)) throw QueryError("predicate on relation '" + p.relation + "' not in the query");
    const auto& rel = schema.relation(p.relation);
    const auto* attr = rel.find_attribute(p.attribute);
    if (attr == nullptr) throw QueryError("unknown attribute '" + p.relation + "." + p.attribute + "'");
    if (rel.is_key_column(p.attribute)) {
      throw QueryError("predicate on key column '" + p.relation + "." + p.attribute + "' is not supported");
    }
    const bool numeric = attr->kind == AttributeKind::kNumeric;
    switch (p.op) {
      case PredicateOp::kEq:
      case PredicateOp::kIn:
        if (p.values.empty()) throw QueryError("predicate on '" + p.attribute + "' has no values");
        if (p.op == PredicateOp::kEq && p.values.size() != 1) {
          throw QueryError("eq predicate on '" + p.attribute + "' needs exactly one value");
        }
        if (numeric) {
          for (const auto& v : p.values) {
            if (!to_number(v)) throw QueryError("value '" + v + "' is not numeric for '" + p.attribute + "'");
          }
        }
        break;
      case PredicateOp::kRange:
        if (!numeric) throw QueryError("range predicate on categorical attribute '" + p.attribute + "'");
        if (std::isnan(p.lo) || std::isnan(p.hi) || p.lo > p.hi) {
          throw QueryError("range on '" + p.attribute + "' has unordered endpoints");
        }
        break;
    }
  }
}

Query parse_query(const std::string& json_text, const Schema& schema) {
  Query q;
  try {
    const auto j = json::parse(json_text);
    for (const auto& r : j.at("relations")) q.relations.push_back(r.get<std::string>());
    if (j.contains("joins")) {
      for (const auto& e : j.at("joins")) {
        if (!e.is_array() || e.size() != 2) throw QueryError("join must be a [parent, fk] pair");
        q.joins.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
      }
    }
    if (j.contains("predicates")) {
      for (const auto& pj : j.at("predicates")) {
        Predicate p;
        p.relation = pj.at("relation").get<std::string>();
        p.attribute = pj.at("attribute").get<std::string>();
        p.op = op_from_string(pj.at("op").get<std::string>());
        switch (p.op) {
          case PredicateOp::kEq:
            p.values.push_back(scalar_text(pj.at("value")));
            break;
          case PredicateOp::kIn:
            for (const auto& v : pj.at("values")) p.values.push_back(scalar_text(v));
            break;
          case PredicateOp::kRange:
            if (!pj.at("lo").is_number() || !pj.at("hi").is_number()) {
              throw QueryError("range endpoints must be numbers");
            }
            p.lo = pj.at("lo").get<double>();
            p.hi = pj.at("hi").get<double>();
            break;
        }
        q.predicates.push_back(std::move(p));
      }
    }
  } catch (const json::exception& e) {
    throw QueryError(std::string("malformed query: ") + e.what());
  }
  validate_query(q, schema);
  return q.canonical();
}

Query load_query(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read query '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (path.extension() == ".sql") return parse_sql(buffer.str(), schema);
  return parse_query(buffer.str(), schema);
}

std::string print_query(const Query& query) {
  const auto q = query.canonical();
  json joins = json::array();
  for (const auto& e : q.joins) joins.push_back({e.parent, e.fk});
  json predicates = json::array();
  for (const auto& p : q.predicates) {
    json pj{{"relation", p.relation}, {"attribute", p.attribute}, {"op", to_string(p.op)}};
    switch (p.op) {
      case PredicateOp::kEq:
        pj["value"] = p.values.front();
        break;
      case PredicateOp::kIn:
        pj["values"] = p.values;
        break;
      case PredicateOp::kRange:
        pj["lo"] = p.lo;
        pj["hi"] = p.hi;
        break;
    }
    predicates.push_back(std::move(pj));
  }
  return json{{"relations", q.relations}, {"joins", joins}, {"predicates", predicates}}.dump();
}

// ---------------------------------------------------------------------------
// SQL subset

namespace {

struct Token {
  enum Kind { kWord, kString, kNumber, kSymbol, kEnd } kind;
  std::string text;
};

std::vector<Token> tokenize(const std::string& sql) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < sql.size()) {
    const char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '\'') {
      std::string s;
      ++i;
      while (true) {
        if (i >= sql.size()) throw QueryError("unterminated string literal");
        if (sql[i] == '\'') {
          if (i + 1 < sql.size() && sql[i + 1] == '\'') {
            s += '\'';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        s += sql[i++];
      }
      out.push_back({Token::kString, s});
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               ((c == '-' || c == '+') && i + 1 < sql.size() && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
      std::size_t j = i + 1;
      while (j < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[j])) || sql[j] == '.' ||
                                ((sql[j] == '-' || sql[j] == '+') && (sql[j - 1] == 'e' || sql[j - 1] == 'E')))) {
        ++j;
      }
      out.push_back({Token::kNumber, sql.substr(i, j - i)});
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[j])) || sql[j] == '_')) ++j;
      out.push_back({Token::kWord, sql.substr(i, j - i)});
      i = j;
    } else if (std::string_view("=,.()*;").find(c) != std::string_view::npos) {
      out.push_back({Token::kSymbol, std::string(1, c)});
      ++i;
    } else {
      throw QueryError(std::string("unexpected character '") + c + "' in SQL");
    }
  }
  out.push_back({Token::kEnd, ""});
  return out;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

class SqlParser {
 public:
  SqlParser(const std::string& sql, const Schema& schema) : tokens_(tokenize(sql)), schema_(schema) {}

  Query parse() {
    expect_keyword("SELECT");
    expect_symbol("*");
    expect_keyword("FROM");
    do {
      const auto name = word();
      if (schema_.find_relation(name) == nullptr) throw QueryError("unknown relation '" + name + "'");
      query_.relations.push_back(name);
      aliases_[name] = name;
      if (is_keyword("AS")) ++pos_;
      if (peek().kind == Token::kWord && !is_keyword("WHERE")) aliases_[word()] = name;
    } while (accept_symbol(","));
    if (accept_keyword("WHERE")) {
      do {
        condition();
      } while (accept_keyword("AND"));
    }
    accept_symbol(";");
    if (peek().kind != Token::kEnd) throw QueryError("unexpected '" + peek().text + "' in SQL");
    return query_;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  bool is_keyword(const char* kw) const { return peek().kind == Token::kWord && upper(peek().text) == kw; }
  bool accept_keyword(const char* kw) {
    if (!is_keyword(kw)) return false;
    ++pos_;
    return true;
  }
  void expect_keyword(const char* kw) {
    if (!accept_keyword(kw)) throw QueryError(std::string("expected ") + kw + " in SQL");
  }
  bool accept_symbol(const char* s) {
    if (peek().kind != Token::kSymbol || peek().text != s) return false;
    ++pos_;
    return true;
  }
  void expect_symbol(const char* s) {
    if (!accept_symbol(s)) throw QueryError(std::string("expected '") + s + "' in SQL");
  }
  std::string word() {
    if (peek().kind != Token::kWord) throw QueryError("expected identifier, got '" + peek().text + "'");
    return tokens_[pos_++].text;
  }
  std::pair<std::string, std::string> column_ref() {
    const auto alias = word();
    expect_symbol(".");
    const auto column = word();
    const auto it = aliases_.find(alias);
    if (it == aliases_.end()) throw QueryError("unknown relation or alias '" + alias + "'");
    return {it->second, column};
  }
  std::string literal() {
    const auto& t = peek();
    if (t.kind != Token::kString && t.kind != Token::kNumber) throw QueryError("expected literal, got '" + t.text + "'");
    return tokens_[pos_++].text;
  }
  double number() {
    const auto text = literal();
    const auto v = to_number(text);
    if (!v) throw QueryError("'" + text + "' is not a number");
    return *v;
  }

  void condition() {
    const auto [rel, col] = column_ref();
    if (accept_keyword("IN")) {
      expect_symbol("(");
      Predicate p{rel, col, PredicateOp::kIn, {}, 0, 0};
      do {
        p.values.push_back(literal());
      } while (accept_symbol(","));
      expect_symbol(")");
      query_.predicates.push_back(std::move(p));
      return;
    }
    if (accept_keyword("BETWEEN")) {
      const double lo = number();
      expect_keyword("AND");
      const double hi = number();
      query_.predicates.push_back({rel, col, PredicateOp::kRange, {}, lo, hi});
      return;
    }
    expect_symbol("=");
    if (peek().kind == Token::kWord) {
      join(rel, col, column_ref());
      return;
    }
    query_.predicates.push_back({rel, col, PredicateOp::kEq, {literal()}, 0, 0});
  }

  void join(const std::string& left_rel, const std::string& left_col,
            const std::pair<std::string, std::string>& right) {
    auto try_edge = [&](const std::string& prel, const std::string& pcol, const std::string& crel,
                        const std::string& ccol) {
      const auto* fk = schema_.relation(prel).find_foreign_key(pcol);
      return fk != nullptr && fk->references == crel && schema_.relation(crel).primary_key == ccol;
    };
    if (try_edge(left_rel, left_col, right.first, right.second)) {
      query_.joins.push_back({left_rel, left_col});
    } else if (try_edge(right.first, right.second, left_rel, left_col)) {
      query_.joins.push_back({right.first, right.second});
    } else {
      throw QueryError("join condition " + left_rel + "." + left_col + " = " + right.first + "." + right.second +
                       " is not a schema foreign key");
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const Schema& schema_;
  std::map<std::string, std::string> aliases_;
  Query query_;
};

}  // namespace

Query parse_sql(const std::string& sql, const Schema& schema) {
  auto q = SqlParser(sql, schema).parse();
  validate_query(q, schema);
  return q.canonical();
}

// ---------------------------------------------------------------------------
// Evidence

DictionaryLookup dictionaries_of(const Catalog& catalog) {
  return [&catalog](const std::string& relation, const std::string& attribute) -> const Dictionary& {
    return *catalog.relation(relation).column(attribute).dictionary;
  };
}

std::vector<std::int32_t> predicate_codes(const Predicate& predicate, const Dictionary& dictionary) {
  std::set<std::int32_t> codes;
  switch (predicate.op) {
    case PredicateOp::kEq:
    case PredicateOp::kIn:
      for (const auto& v : predicate.values) {
        if (dictionary.kind() == AttributeKind::kNumeric) {
          const auto x = to_number(v);
          if (!x) throw QueryError("value '" + v + "' is not numeric");
          if (const auto bin = dictionary.bin_of(*x)) codes.insert(*bin);
        } else if (const auto code = dictionary.code_of(v)) {
          codes.insert(*code);
        }
      }
      break;
    case PredicateOp::kRange:
      if (dictionary.kind() != AttributeKind::kNumeric) throw QueryError("range predicate on categorical attribute");
      for (const auto c : dictionary.bins_overlapping(predicate.lo, predicate.hi)) codes.insert(c);
      break;
  }
  return {codes.begin(), codes.end()};
}

EvidenceMap collect_evidence(const Query& query, const DictionaryLookup& lookup) {
  EvidenceMap out;
  for (const auto& p : query.predicates) {
    const auto key = std::make_pair(p.relation, p.attribute);
    auto codes = predicate_codes(p, lookup(p.relation, p.attribute));
    const auto it = out.find(key);
    if (it == out.end()) {
      out.emplace(key, std::move(codes));
    } else {
      std::vector<std::int32_t> both;
      std::set_intersection(it->second.begin(), it->second.end(), codes.begin(), codes.end(),
                            std::back_inserter(both));
      it->second = std::move(both);
    }
  }
  return out;
}

}  // namespace lbn
