#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "refl/errors.hpp"
#include "refl/machine.hpp"

namespace refl {
namespace {

struct Token {
  std::string text;
  int column;  // 1-based
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == ';') break;  // comment
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) &&
           line[i] != ',' && line[i] != ';')
      ++i;
    out.push_back(Token{line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return s;
}

bool parse_uint(const std::string& s, std::int64_t* out) {
  if (s.empty()) return false;
  std::int64_t v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    v = v * 10 + (c - '0');
    if (v > (std::int64_t{1} << 40)) return false;
  }
  *out = v;
  return true;
}

struct PendingJump {
  std::size_t instr;
  std::string label;
  int line;
  int column;
};

}  // namespace

Program assemble(const std::string& source) {
  Program program;
  program.source = source;
  std::map<std::string, std::int64_t> labels;
  std::vector<PendingJump> pending;

  std::istringstream in(source);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<Token> toks = tokenize(line);
    if (toks.empty()) continue;

    // Any number of leading "name:" labels may precede an instruction.
    while (!toks.empty() && toks.front().text.size() > 1 &&
           toks.front().text.back() == ':') {
      std::string name = toks.front().text.substr(0, toks.front().text.size() - 1);
      if (labels.count(name))
        throw ParseError(lineno, toks.front().column, "duplicate label '" + name + "'");
      labels[name] = static_cast<std::int64_t>(program.code.size());
      toks.erase(toks.begin());
    }
    if (toks.empty()) continue;

    const Token& head = toks.front();
    const std::string op = upper(head.text);
    Instruction ins;
    auto want_operands = [&](std::size_t n) {
      if (toks.size() != n + 1)
        throw ParseError(lineno, head.column,
                         op + " takes " + std::to_string(n) + " operand(s), got " +
                             std::to_string(toks.size() - 1));
    };

    if (op == "COIN") {
      want_operands(0);
      ins.op = Opcode::kCoin;
    } else if (op == "INPUT") {
      want_operands(0);
      ins.op = Opcode::kInput;
    } else if (op == "PUSH0") {
      want_operands(0);
      ins.op = Opcode::kPush0;
    } else if (op == "PUSH1") {
      want_operands(0);
      ins.op = Opcode::kPush1;
    } else if (op == "OUT0") {
      want_operands(0);
      ins.op = Opcode::kOut0;
    } else if (op == "OUT1") {
      want_operands(0);
      ins.op = Opcode::kOut1;
    } else if (op == "SCLR") {
      want_operands(0);
      ins.op = Opcode::kSClear;
    } else if (op == "S0") {
      want_operands(0);
      ins.op = Opcode::kS0;
    } else if (op == "S1") {
      want_operands(0);
      ins.op = Opcode::kS1;
    } else if (op == "SINPUT") {
      want_operands(1);
      ins.op = Opcode::kSInput;
      if (!parse_uint(toks[1].text, &ins.a))
        throw ParseError(lineno, toks[1].column, "SINPUT needs a bit count");
    } else if (op == "JMP" || op == "JZ") {
      want_operands(1);
      ins.op = (op == "JMP") ? Opcode::kJmp : Opcode::kJz;
      if (!parse_uint(toks[1].text, &ins.a)) {
        pending.push_back(
            PendingJump{program.code.size(), toks[1].text, lineno, toks[1].column});
      }
    } else if (op == "ORACLE") {
      want_operands(3);
      ins.op = Opcode::kOracle;
      const std::string ref = upper(toks[1].text);
      if (ref == "SELF") {
        ins.machine_ref = kSelfRef;
      } else {
        std::int64_t idx = 0;
        if (!parse_uint(toks[1].text, &idx) || idx < 1)
          throw ParseError(lineno, toks[1].column,
                           "machine reference must be SELF or a positive index");
        ins.machine_ref = static_cast<int>(idx);
      }
      const std::string str = toks[2].text;
      const std::string ustr = upper(str);
      if (ustr == "EPS") {
        ins.str_kind = QueryStringKind::kLiteral;
      } else if (ustr == "BUF") {
        ins.str_kind = QueryStringKind::kBuilder;
      } else if (ustr == "INPUT") {
        ins.str_kind = QueryStringKind::kInput;
      } else if (is_bitstring(str)) {
        ins.str_kind = QueryStringKind::kLiteral;
        ins.str_literal = str;
      } else {
        throw ParseError(lineno, toks[2].column,
                         "query string must be eps, buf, input, or a bit string");
      }
      Rat p;
      try {
        p = parse_rational(toks[3].text);
      } catch (const ParseError&) {
        throw ParseError(lineno, toks[3].column,
                         "malformed dyadic literal '" + toks[3].text + "'");
      }
      if (!as_dyadic(p) || p < 0 || p > 1)
        throw ParseError(lineno, toks[3].column,
                         "malformed dyadic literal '" + toks[3].text +
                             "' (need n/2^k in [0,1])");
      ins.threshold = p;
    } else {
      throw ParseError(lineno, head.column, "unknown opcode '" + head.text + "'");
    }
    program.code.push_back(std::move(ins));
  }

  for (const PendingJump& j : pending) {
    auto it = labels.find(j.label);
    if (it == labels.end())
      throw ParseError(j.line, j.column, "undefined label '" + j.label + "'");
    program.code[j.instr].a = it->second;
  }
  return program;
}

}  // namespace refl
