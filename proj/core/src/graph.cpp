#include "ad3/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace ad3 {

const char* factor_kind_name(FactorKind kind) {
  switch (kind) {
    case FactorKind::kDense: return "DENSE";
    case FactorKind::kPair: return "PAIR";
    case FactorKind::kXor: return "XOR";
    case FactorKind::kOr: return "OR";
    case FactorKind::kOrOut: return "OR_OUT";
    case FactorKind::kSequence: return "SEQUENCE";
  }
  return "?";
}

bool is_logic_kind(FactorKind kind) {
  return kind == FactorKind::kXor || kind == FactorKind::kOr ||
         kind == FactorKind::kOrOut;
}

namespace {

std::uint64_t table_size(const FactorGraph& graph, const Factor& factor) {
  std::uint64_t size = 1;
  for (int v : factor.variables) {
    size *= static_cast<std::uint64_t>(graph.variables[v].num_states);
  }
  return size;
}

}  // namespace

void validate_graph(const FactorGraph& graph) {
  const int num_vars = graph.num_variables();
  for (int i = 0; i < num_vars; ++i) {
    const Variable& var = graph.variables[i];
    if (var.num_states < 1) {
      throw ValidationError("variable " + std::to_string(i) +
                            " has no states");
    }
    if (static_cast<int>(var.unary.size()) != var.num_states) {
      throw ValidationError("variable " + std::to_string(i) +
                            ": unary potential length mismatch");
    }
  }
  std::set<std::pair<int, int>> seen;
  std::size_t edge_cursor = 0;
  for (int f = 0; f < graph.num_factors(); ++f) {
    const Factor& factor = graph.factors[f];
    if (factor.variables.empty()) {
      throw ValidationError("factor " + std::to_string(f) + " has no inputs");
    }
    for (int v : factor.variables) {
      if (v < 0 || v >= num_vars) {
        throw ValidationError("factor " + std::to_string(f) +
                              ": variable index out of range");
      }
      if (!seen.insert({v, f}).second) {
        throw ValidationError("factor " + std::to_string(f) +
                              ": duplicate link to variable " +
                              std::to_string(v));
      }
      if (edge_cursor >= graph.edges.size() ||
          graph.edges[edge_cursor] != std::make_pair(v, f)) {
        throw ValidationError("edge list out of sync with factor " +
                              std::to_string(f));
      }
      ++edge_cursor;
    }
    if (is_logic_kind(factor.kind)) {
      if (factor.negated.size() != factor.variables.size()) {
        throw ValidationError("factor " + std::to_string(f) +
                              ": sign flags length mismatch");
      }
      for (int v : factor.variables) {
        if (graph.variables[v].num_states != 2) {
          throw ValidationError("logic factor on non-binary variable");
        }
      }
      if (factor.kind == FactorKind::kOrOut && factor.degree() < 2) {
        throw ValidationError("OR_OUT factor needs at least one input and "
                              "one output");
      }
      if (!factor.table.empty() || !factor.transitions.empty()) {
        throw ValidationError("logic factor carries a payload");
      }
    } else {
      if (!factor.negated.empty()) {
        throw ValidationError("sign flags permitted only on logic factors");
      }
    }
    switch (factor.kind) {
      case FactorKind::kDense:
        if (factor.table.size() != table_size(graph, factor)) {
          throw ValidationError("factor " + std::to_string(f) +
                                ": DENSE table size mismatch");
        }
        break;
      case FactorKind::kPair:
        if (factor.degree() != 2 ||
            graph.variables[factor.variables[0]].num_states != 2 ||
            graph.variables[factor.variables[1]].num_states != 2) {
          throw ValidationError("PAIR factor requires two binary variables");
        }
        if (factor.table.size() != 4) {
          throw ValidationError("PAIR factor needs 4 table entries");
        }
        break;
      case FactorKind::kSequence: {
        if (factor.degree() < 2) {
          throw ValidationError("SEQUENCE factor needs at least 2 variables");
        }
        if (static_cast<int>(factor.transitions.size()) !=
            factor.degree() - 1) {
          throw ValidationError("SEQUENCE transition table count mismatch");
        }
        for (int p = 0; p + 1 < factor.degree(); ++p) {
          const std::size_t expected =
              static_cast<std::size_t>(
                  graph.variables[factor.variables[p]].num_states) *
              graph.variables[factor.variables[p + 1]].num_states;
          if (factor.transitions[p].size() != expected) {
            throw ValidationError("SEQUENCE transition table " +
                                  std::to_string(p) + " size mismatch");
          }
        }
        break;
      }
      default:
        break;
    }
  }
  if (edge_cursor != graph.edges.size()) {
    throw ValidationError("edge list has extra entries");
  }
}

namespace {

double parse_double(const std::string& token, int line) {
  if (token == "-inf") return kNegInf;
  double value;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, "bad number '" + token + "'");
  }
  return value;
}

int parse_int(const std::string& token, int line) {
  int value;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, "bad integer '" + token + "'");
  }
  return value;
}

void append_double(std::string* out, double value) {
  if (value == kNegInf) {
    *out += "-inf";
    return;
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out->append(buf, ptr);
}

}  // namespace

FactorGraph parse_graph(const std::string& text) {
  FactorGraph graph;
  bool saw_header = false;
  int declared_vars = 0;
  std::istringstream stream(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    std::istringstream line(raw);
    std::vector<std::string> tokens;
    std::string token;
    while (line >> token) tokens.push_back(token);
    if (tokens.empty()) continue;

    if (tokens[0] == "variables") {
      if (tokens.size() != 2) throw ParseError(line_no, "variables N");
      if (saw_header) throw ParseError(line_no, "duplicate variables line");
      saw_header = true;
      declared_vars = parse_int(tokens[1], line_no);
      if (declared_vars < 0) throw ParseError(line_no, "negative count");
    } else if (tokens[0] == "var") {
      if (!saw_header) throw ParseError(line_no, "var before variables line");
      if (tokens.size() < 3) throw ParseError(line_no, "truncated var line");
      Variable var;
      var.id = parse_int(tokens[1], line_no);
      var.num_states = parse_int(tokens[2], line_no);
      if (var.id != static_cast<int>(graph.variables.size())) {
        throw ParseError(line_no, "variables must be declared in order");
      }
      if (var.num_states < 1) throw ParseError(line_no, "num_states < 1");
      if (static_cast<int>(tokens.size()) != 3 + var.num_states) {
        throw ParseError(line_no, "unary potential length mismatch");
      }
      for (int s = 0; s < var.num_states; ++s) {
        var.unary.push_back(parse_double(tokens[3 + s], line_no));
      }
      graph.variables.push_back(std::move(var));
    } else if (tokens[0] == "factor") {
      if (!saw_header) {
        throw ParseError(line_no, "factor before variables line");
      }
      if (tokens.size() < 3) throw ParseError(line_no, "truncated factor");
      Factor factor;
      const std::string& kind = tokens[1];
      if (kind == "DENSE") factor.kind = FactorKind::kDense;
      else if (kind == "PAIR") factor.kind = FactorKind::kPair;
      else if (kind == "XOR") factor.kind = FactorKind::kXor;
      else if (kind == "OR") factor.kind = FactorKind::kOr;
      else if (kind == "OR_OUT") factor.kind = FactorKind::kOrOut;
      else if (kind == "SEQUENCE") factor.kind = FactorKind::kSequence;
      else throw ParseError(line_no, "unknown factor kind '" + kind + "'");
      const int arity = parse_int(tokens[2], line_no);
      if (arity < 1) throw ParseError(line_no, "arity < 1");
      if (static_cast<int>(tokens.size()) < 3 + arity) {
        throw ParseError(line_no, "truncated factor variable list");
      }
      std::size_t cursor = 3;
      for (int k = 0; k < arity; ++k, ++cursor) {
        int coded = parse_int(tokens[cursor], line_no);
        if (is_logic_kind(factor.kind)) {
          if (coded == 0) throw ParseError(line_no, "signed index is 1-based");
          factor.negated.push_back(coded < 0);
          factor.variables.push_back((coded < 0 ? -coded : coded) - 1);
        } else {
          factor.variables.push_back(coded);
        }
      }
      auto remaining = [&]() { return tokens.size() - cursor; };
      if (factor.kind == FactorKind::kDense ||
          factor.kind == FactorKind::kPair) {
        while (cursor < tokens.size()) {
          factor.table.push_back(parse_double(tokens[cursor++], line_no));
        }
      } else if (factor.kind == FactorKind::kSequence) {
        for (int v : factor.variables) {
          if (v < 0 || v >= static_cast<int>(graph.variables.size())) {
            throw ParseError(line_no, "variable index out of range");
          }
        }
        for (int p = 0; p + 1 < arity; ++p) {
          const std::size_t expected =
              static_cast<std::size_t>(
                  graph.variables[factor.variables[p]].num_states) *
              graph.variables[factor.variables[p + 1]].num_states;
          if (remaining() < expected) {
            throw ParseError(line_no, "truncated transition table");
          }
          std::vector<double> table;
          for (std::size_t e = 0; e < expected; ++e) {
            table.push_back(parse_double(tokens[cursor++], line_no));
          }
          factor.transitions.push_back(std::move(table));
        }
      }
      if (cursor != tokens.size()) {
        throw ParseError(line_no, "trailing tokens on factor line");
      }
      const int factor_index = graph.num_factors();
      for (int v : factor.variables) graph.edges.emplace_back(v, factor_index);
      graph.factors.push_back(std::move(factor));
    } else {
      throw ParseError(line_no, "unknown statement '" + tokens[0] + "'");
    }
  }
  if (!saw_header) throw ParseError(line_no, "missing variables line");
  if (declared_vars != graph.num_variables()) {
    throw ParseError(line_no, "declared " + std::to_string(declared_vars) +
                                  " variables, found " +
                                  std::to_string(graph.num_variables()));
  }
  validate_graph(graph);
  return graph;
}

std::string serialize_graph(const FactorGraph& graph) {
  std::string out;
  out += "variables " + std::to_string(graph.num_variables()) + "\n";
  for (int i = 0; i < graph.num_variables(); ++i) {
    const Variable& var = graph.variables[i];
    out += "var " + std::to_string(i) + " " + std::to_string(var.num_states);
    for (double value : var.unary) {
      out += ' ';
      append_double(&out, value);
    }
    out += '\n';
  }
  for (const Factor& factor : graph.factors) {
    out += "factor ";
    out += factor_kind_name(factor.kind);
    out += " " + std::to_string(factor.degree());
    for (int k = 0; k < factor.degree(); ++k) {
      out += ' ';
      if (is_logic_kind(factor.kind)) {
        const int coded = factor.variables[k] + 1;
        out += std::to_string(factor.negated[k] ? -coded : coded);
      } else {
        out += std::to_string(factor.variables[k]);
      }
    }
    for (double value : factor.table) {
      out += ' ';
      append_double(&out, value);
    }
    for (const auto& table : factor.transitions) {
      for (double value : table) {
        out += ' ';
        append_double(&out, value);
      }
    }
    out += '\n';
  }
  return out;
}

double factor_score(const Factor& factor, const FactorGraph& graph,
                    const std::vector<int>& states) {
  switch (factor.kind) {
    case FactorKind::kDense: {
      std::size_t index = 0;
      for (int k = 0; k < factor.degree(); ++k) {
        index = index * graph.variables[factor.variables[k]].num_states +
                states[k];
      }
      return factor.table[index];
    }
    case FactorKind::kPair:
      return factor.table[2 * states[0] + states[1]];
    case FactorKind::kSequence: {
      double score = 0.0;
      for (int p = 0; p + 1 < factor.degree(); ++p) {
        const int next_states =
            graph.variables[factor.variables[p + 1]].num_states;
        score += factor.transitions[p][states[p] * next_states +
                                       states[p + 1]];
      }
      return score;
    }
    case FactorKind::kXor:
    case FactorKind::kOr:
    case FactorKind::kOrOut: {
      int active = 0;  // effective ones among the inputs
      int output = 0;
      const int num_inputs = factor.kind == FactorKind::kOrOut
                                 ? factor.degree() - 1
                                 : factor.degree();
      for (int k = 0; k < factor.degree(); ++k) {
        const int effective = states[k] ^ (factor.negated[k] ? 1 : 0);
        if (k < num_inputs) active += effective;
        else output = effective;
      }
      bool ok = false;
      if (factor.kind == FactorKind::kXor) ok = active == 1;
      else if (factor.kind == FactorKind::kOr) ok = active >= 1;
      else ok = output == (active >= 1 ? 1 : 0);
      return ok ? 0.0 : kNegInf;
    }
  }
  return kNegInf;
}

double evaluate(const FactorGraph& graph, const Assignment& assignment) {
  if (static_cast<int>(assignment.states.size()) != graph.num_variables()) {
    throw std::invalid_argument("assignment size mismatch");
  }
  double total = 0.0;
  for (int i = 0; i < graph.num_variables(); ++i) {
    const int s = assignment.states[i];
    if (s < 0 || s >= graph.variables[i].num_states) {
      throw std::invalid_argument("state index out of range");
    }
    total += graph.variables[i].unary[s];
  }
  std::vector<int> states;
  for (const Factor& factor : graph.factors) {
    states.clear();
    for (int v : factor.variables) states.push_back(assignment.states[v]);
    total += factor_score(factor, graph, states);
  }
  return total;
}

MapResult brute_force_map(const FactorGraph& graph,
                          std::uint64_t enumeration_cap) {
  std::uint64_t count = 1;
  for (const Variable& var : graph.variables) {
    count *= static_cast<std::uint64_t>(var.num_states);
    if (count > enumeration_cap) {
      throw std::runtime_error("enumeration cap exceeded");
    }
  }
  MapResult best;
  Assignment current;
  current.states.assign(graph.num_variables(), 0);
  bool first = true;
  while (true) {
    const double value = evaluate(graph, current);
    if (first || value > best.value) {
      best.assignment = current;
      best.value = value;
      first = false;
    }
    // lexicographic odometer; ties keep the earliest (smallest) assignment
    int pos = graph.num_variables() - 1;
    while (pos >= 0 &&
           current.states[pos] + 1 >= graph.variables[pos].num_states) {
      current.states[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++current.states[pos];
  }
  if (first) {  // zero-variable graph: the empty assignment scores 0
    best.value = 0.0;
    best.assignment.states.clear();
  }
  return best;
}

Assignment BinarizeMap::recover(const Assignment& binarized) const {
  Assignment result;
  for (const std::vector<int>& vars : state_vars) {
    int chosen = 0;
    for (int s = 0; s < static_cast<int>(vars.size()); ++s) {
      if (binarized.states[vars[s]] == 1) {
        chosen = s;
        break;
      }
    }
    result.states.push_back(chosen);
  }
  return result;
}

BinarizeResult binarize(const FactorGraph& graph) {
  for (const Factor& factor : graph.factors) {
    if (factor.kind != FactorKind::kDense &&
        factor.kind != FactorKind::kPair) {
      throw std::invalid_argument("binarize handles DENSE/PAIR factors only");
    }
  }
  BinarizeResult result;
  FactorGraph& out = result.graph;

  auto add_binary_var = [&](double score_when_on) {
    Variable var;
    var.id = out.num_variables();
    var.num_states = 2;
    var.unary = {0.0, score_when_on};
    out.variables.push_back(std::move(var));
    return var.id;
  };
  auto add_xor = [&](const std::vector<int>& vars,
                     const std::vector<bool>& negated) {
    Factor factor;
    factor.kind = FactorKind::kXor;
    factor.variables = vars;
    factor.negated = negated;
    const int index = out.num_factors();
    for (int v : vars) out.edges.emplace_back(v, index);
    out.factors.push_back(std::move(factor));
  };

  // One indicator per original variable state, tied by a XOR.
  for (const Variable& var : graph.variables) {
    std::vector<int> indicators;
    for (int s = 0; s < var.num_states; ++s) {
      indicators.push_back(add_binary_var(var.unary[s]));
    }
    add_xor(indicators, std::vector<bool>(indicators.size(), false));
    result.map.state_vars.push_back(std::move(indicators));
  }

  // One indicator per factor configuration, carrying its log-potential,
  // plus marginalization XORs against the negated state indicators.
  std::vector<int> states;
  for (const Factor& factor : graph.factors) {
    std::vector<int> config_vars;
    std::uint64_t num_configs = 1;
    for (int v : factor.variables) {
      num_configs *= graph.variables[v].num_states;
    }
    states.assign(factor.degree(), 0);
    for (std::uint64_t c = 0; c < num_configs; ++c) {
      config_vars.push_back(
          add_binary_var(factor_score(factor, graph, states)));
      for (int pos = factor.degree() - 1; pos >= 0; --pos) {
        if (++states[pos] < graph.variables[factor.variables[pos]].num_states)
          break;
        states[pos] = 0;
      }
    }
    // Strides of the row-major configuration index.
    std::vector<std::uint64_t> stride(factor.degree(), 1);
    for (int k = factor.degree() - 2; k >= 0; --k) {
      stride[k] = stride[k + 1] *
                  graph.variables[factor.variables[k + 1]].num_states;
    }
    for (int k = 0; k < factor.degree(); ++k) {
      const int var = factor.variables[k];
      for (int s = 0; s < graph.variables[var].num_states; ++s) {
        std::vector<int> members;
        std::vector<bool> negated;
        for (std::uint64_t c = 0; c < num_configs; ++c) {
          if (static_cast<int>((c / stride[k]) %
                               graph.variables[var].num_states) == s) {
            members.push_back(config_vars[c]);
            negated.push_back(false);
          }
        }
        members.push_back(result.map.state_vars[var][s]);
        negated.push_back(true);
        add_xor(members, negated);
      }
    }
  }
  validate_graph(out);
  return result;
}

}  // namespace ad3
