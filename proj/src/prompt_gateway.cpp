#include "zpd/prompt_gateway.hpp"

#include <json.hpp>

#include <algorithm>
#include <regex>

#include "zpd/error.hpp"
#include "zpd/util.hpp"

namespace zpd {

using nlohmann::json;

PromptTemplate default_template(Task task) {
  if (task == Task::Mathqa) {
    return {Task::Mathqa, "Question: {math_problem}\nAnswer: {step_by_step_answer}.",
            "step_by_step_answer"};
  }
  return {Task::Stance,
          "Text: {sentence}\n"
          "Question: Which stance-\"favor,\" \"against,\" or \"neutral\"-does the above text "
          "express toward {target}?\n"
          "Answer: {stance}.",
          "stance"};
}

namespace {

std::vector<std::string> template_placeholders(const std::string& body) {
  std::vector<std::string> names;
  static const std::regex re(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
  for (auto it = std::sregex_iterator(body.begin(), body.end(), re);
       it != std::sregex_iterator(); ++it) {
    names.push_back((*it)[1].str());
  }
  return names;
}

// Placeholder bindings for a query: a JSON-object input_text binds field by
// field, anything else binds every non-answer placeholder to the raw text.
std::map<std::string, std::string> query_bindings(const Query& query,
                                                  const PromptTemplate& tmpl) {
  std::map<std::string, std::string> bindings;
  if (!query.input_text.empty() && query.input_text.front() == '{') {
    json j = json::parse(query.input_text, nullptr, false);
    if (j.is_object()) {
      bool all_strings = true;
      for (const auto& [k, v] : j.items()) {
        if (!v.is_string()) { all_strings = false; break; }
      }
      if (all_strings) {
        for (const auto& [k, v] : j.items()) bindings[k] = v.get<std::string>();
        return bindings;
      }
    }
  }
  for (const auto& name : template_placeholders(tmpl.body)) {
    if (name != tmpl.answer_slot) bindings[name] = query.input_text;
  }
  return bindings;
}

std::string substitute(const std::string& body,
                       const std::map<std::string, std::string>& bindings,
                       const PromptTemplate& tmpl) {
  std::string out = body;
  for (const auto& name : template_placeholders(body)) {
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw Error("unbound placeholder {" + name + "} in template for task " +
                  task_name(tmpl.task));
    }
    const std::string marker = "{" + name + "}";
    size_t pos;
    while ((pos = out.find(marker)) != std::string::npos) {
      out.replace(pos, marker.size(), it->second);
    }
  }
  return out;
}

std::string rstrip_spaces(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

}  // namespace

std::string render_demo(const Query& query, const std::string& answer,
                        const PromptTemplate& tmpl) {
  auto bindings = query_bindings(query, tmpl);
  bindings[tmpl.answer_slot] = answer;
  return substitute(tmpl.body, bindings, tmpl);
}

std::string render_query_open(const Query& query, const PromptTemplate& tmpl) {
  const std::string marker = "{" + tmpl.answer_slot + "}";
  const size_t cut = tmpl.body.find(marker);
  if (cut == std::string::npos) {
    throw Error("template for task " + task_name(tmpl.task) + " has no answer slot {" +
                tmpl.answer_slot + "}");
  }
  auto bindings = query_bindings(query, tmpl);
  return rstrip_spaces(substitute(tmpl.body.substr(0, cut), bindings, tmpl));
}

std::string render_prompt(const Query& query, const std::vector<Demo>& demos,
                          const PromptTemplate& tmpl) {
  std::string out;
  for (const auto& [demo_query, answer] : demos) {
    if (demo_query.example_id == query.example_id) {
      throw Error("demonstration " + demo_query.example_id + " equals the target query");
    }
    out += render_demo(demo_query, answer, tmpl);
    out += "\n\n";
  }
  out += render_query_open(query, tmpl);
  return out;
}

std::string gold_continuation(const Query& query, const PromptTemplate& tmpl) {
  const std::string closed = render_demo(query, query.gold_answer, tmpl);
  const std::string open = render_query_open(query, tmpl);
  return closed.substr(open.size());
}

std::string normalize_number(const std::string& s) {
  std::string t;
  t.reserve(s.size());
  for (char c : s) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) continue;
    t.push_back(c);
  }
  bool negative = false;
  size_t i = 0;
  if (i < t.size() && (t[i] == '+' || t[i] == '-')) {
    negative = t[i] == '-';
    ++i;
  }
  t = t.substr(i);
  if (t.empty()) return t;
  if (t.front() == '.') t = "0" + t;
  // strip leading zeros in the integer part
  size_t keep = 0;
  while (keep + 1 < t.size() && t[keep] == '0' && std::isdigit(static_cast<unsigned char>(t[keep + 1]))) {
    ++keep;
  }
  t = t.substr(keep);
  if (t.find('.') != std::string::npos) {
    while (!t.empty() && t.back() == '0') t.pop_back();
    if (!t.empty() && t.back() == '.') t.pop_back();
  }
  if (t.empty() || t == "0") return "0";
  return negative ? "-" + t : t;
}

namespace {

const std::regex kNumberRe(R"([-+]?(?:\d[\d,]*(?:\.\d*)?|\.\d+))");

std::optional<std::string> first_number(const std::string& text) {
  std::smatch m;
  if (std::regex_search(text, m, kNumberRe)) return m.str();
  return std::nullopt;
}

std::optional<std::string> last_number(const std::string& text) {
  std::optional<std::string> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kNumberRe);
       it != std::sregex_iterator(); ++it) {
    found = it->str();
  }
  return found;
}

AnswerScore score_mathqa(const std::string& raw_output, const std::string& gold) {
  std::optional<std::string> extracted;
  const size_t marker = raw_output.rfind("####");
  if (marker != std::string::npos) {
    extracted = first_number(raw_output.substr(marker + 4));
  } else {
    extracted = last_number(raw_output);
  }
  double score = 0.0;
  if (extracted && normalize_number(*extracted) == normalize_number(gold)) score = 1.0;
  return {score, score > 0.5 ? 1 : 0};
}

AnswerScore score_stance(const std::string& raw_output, const std::string& gold) {
  static const std::vector<std::string> kLabels = {"favor", "against", "neutral"};
  const std::string low = to_lower(raw_output);
  size_t best_pos = std::string::npos;
  std::string predicted;
  for (const auto& label : kLabels) {
    const size_t pos = low.find(label);
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      predicted = label;
    }
  }
  const double score = (!predicted.empty() && predicted == to_lower(trim(gold))) ? 1.0 : 0.0;
  return {score, score > 0.5 ? 1 : 0};
}

}  // namespace

AnswerScore score_answer(Task task, const std::string& raw_output, const std::string& gold) {
  return task == Task::Mathqa ? score_mathqa(raw_output, gold) : score_stance(raw_output, gold);
}

long count_tokens(const std::string& text) {
  return static_cast<long>(whitespace_tokens(text).size());
}

}  // namespace zpd
