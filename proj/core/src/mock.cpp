#include "vrduqa/mock.hpp"

#include <regex>

#include <fmt/format.h>

#include "vrduqa/error.hpp"
#include "vrduqa/hashing.hpp"
#include "vrduqa/image.hpp"

namespace vrduqa::mock {

namespace {

std::vector<std::string> string_list(const json& j) {
  if (j.is_string()) return {j.get<std::string>()};
  return j.get<std::vector<std::string>>();
}

MockRule parse_rule(const json& j) {
  static const std::vector<std::string> kKnown = {"contains", "regex",   "icase",     "times",
                                                  "status",   "response", "choices",  "bernoulli",
                                                  "decode_image"};
  for (const auto& [key, _] : j.items())
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end())
      throw ConfigError(fmt::format("mock rule: unknown key '{}'", key));
  MockRule r;
  if (j.contains("contains")) r.contains = string_list(j["contains"]);
  r.regex = j.value("regex", std::string{});
  r.icase = j.value("icase", false);
  r.times = j.value("times", -1);
  r.status = j.value("status", 0);
  if (j.contains("response")) r.response = j["response"].get<std::string>();
  if (j.contains("choices")) r.choices = j["choices"].get<std::vector<std::string>>();
  if (j.contains("bernoulli")) {
    const json& b = j["bernoulli"];
    r.bernoulli_rate = b.at("rate").get<double>();
    r.yes = string_list(b.at("yes"));
    r.no = string_list(b.at("no"));
    if (r.yes.empty() || r.no.empty()) throw ConfigError("mock bernoulli rule needs yes and no texts");
  }
  r.decode_image = j.value("decode_image", false);
  const int actions = (r.status != 0) + r.response.has_value() + !r.choices.empty() +
                      r.bernoulli_rate.has_value() + r.decode_image;
  if (actions != 1)
    throw ConfigError(fmt::format("mock rule must have exactly one action: {}", j.dump()));
  return r;
}

std::string substitute(const std::string& tmpl, const std::smatch* m) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '$' && i + 1 < tmpl.size() && std::isdigit(static_cast<unsigned char>(tmpl[i + 1]))) {
      const auto g = static_cast<std::size_t>(tmpl[i + 1] - '0');
      if (m && g < m->size()) out += (*m)[g].str();
      ++i;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  return out;
}

const std::string& pick(const std::vector<std::string>& options, const std::string& digest) {
  const auto idx = static_cast<std::size_t>(unit_from_hex(digest) * static_cast<double>(options.size()));
  return options[std::min(idx, options.size() - 1)];
}

providers::HttpReply ok_chat(const std::string& text) {
  json body{{"choices", json::array({{{"index", 0},
                                      {"message", {{"role", "assistant"}, {"content", text}}},
                                      {"finish_reason", "stop"}}})}};
  return {200, body.dump(), {}};
}

}  // namespace

MockScript MockScript::parse(const json& j) {
  MockScript s;
  for (const auto& [name, pj] : j.at("providers").items()) {
    MockProviderScript ps;
    for (const auto& rj : pj.value("rules", json::array())) ps.rules.push_back(parse_rule(rj));
    for (const auto& lj : pj.value("lexicon", json::array()))
      ps.lexicon.push_back({lj.at("label").get<std::string>(), lj.at("pattern").get<std::string>(),
                            lj.value("score", 0.9), lj.value("icase", false)});
    s.providers.emplace(name, std::move(ps));
  }
  return s;
}

MockScript MockScript::load(const fs::path& path) {
  try {
    return parse(read_json_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("mock script {}: {}", path.string(), e.what()));
  }
}

MockEndpoint::MockEndpoint(std::string provider_name, providers::ProviderType type,
                           MockProviderScript script)
    : name_(std::move(provider_name)), type_(type), script_(std::move(script)),
      hits_(script_.rules.size(), 0) {}

std::size_t MockEndpoint::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

providers::HttpReply MockEndpoint::post(const json& body, const std::map<std::string, std::string>&,
                                        double) {
  {
    std::lock_guard lock(mu_);
    ++calls_;
  }
  try {
    if (type_ == providers::ProviderType::Ner) return ner(body);
    return chat(body);
  } catch (const json::exception& e) {
    return {400, fmt::format("mock '{}': bad request: {}", name_, e.what()), {}};
  }
}

providers::HttpReply MockEndpoint::chat(const json& body) {
  std::string text;
  std::vector<std::string> images;
  for (const auto& msg : body.at("messages")) {
    const json& content = msg.at("content");
    if (content.is_string()) {
      if (!text.empty()) text += "\n";
      text += content.get<std::string>();
      continue;
    }
    for (const auto& part : content) {
      const std::string type = part.at("type").get<std::string>();
      if (type == "text") {
        if (!text.empty()) text += "\n";
        text += part.at("text").get<std::string>();
      } else if (type == "image_url") {
        const std::string url = part.at("image_url").at("url").get<std::string>();
        const auto comma = url.find(',');
        images.push_back(base64_decode(comma == std::string::npos ? url : url.substr(comma + 1)));
      }
    }
  }
  std::string digest_material = name_ + '\x1f' + text;
  for (const auto& img : images) digest_material += '\x1f' + sha256_hex(img);
  const std::string digest = sha256_hex(digest_material);

  for (std::size_t i = 0; i < script_.rules.size(); ++i) {
    const MockRule& r = script_.rules[i];
    bool match = std::all_of(r.contains.begin(), r.contains.end(),
                             [&](const std::string& c) { return text.find(c) != std::string::npos; });
    if (!match) continue;
    std::smatch m;
    bool has_match = false;
    if (!r.regex.empty()) {
      auto flags = std::regex::ECMAScript;
      if (r.icase) flags |= std::regex::icase;
      const std::regex re(r.regex, flags);
      if (!std::regex_search(text, m, re)) continue;
      has_match = true;
    }
    {
      std::lock_guard lock(mu_);
      if (r.times >= 0 && hits_[i] >= r.times) continue;
      ++hits_[i];
    }
    if (r.status != 0) return {r.status, fmt::format("mock '{}' scripted failure", name_), {}};
    if (r.response) return ok_chat(substitute(*r.response, has_match ? &m : nullptr));
    if (!r.choices.empty()) return ok_chat(pick(r.choices, digest));
    if (r.bernoulli_rate) {
      const bool yes = unit_from_hex(sha256_hex(digest + "#b")) < *r.bernoulli_rate;
      return ok_chat(pick(yes ? r.yes : r.no, sha256_hex(digest + "#c")));
    }
    if (r.decode_image) {
      if (images.empty()) return {400, fmt::format("mock '{}': no image attached", name_), {}};
      return ok_chat(extract_embedded_text(images.front()).value_or(""));
    }
  }
  return {404, fmt::format("mock '{}': no rule matched", name_), {}};
}

providers::HttpReply MockEndpoint::ner(const json& body) {
  const std::string text = body.at("text").get<std::string>();
  std::vector<std::string> wanted;
  for (const auto& l : body.at("labels")) wanted.push_back(l.at("name").get<std::string>());
  json entities = json::array();
  for (const auto& entry : script_.lexicon) {
    if (std::find(wanted.begin(), wanted.end(), entry.label) == wanted.end()) continue;
    auto flags = std::regex::ECMAScript;
    if (entry.icase) flags |= std::regex::icase;
    const std::regex re(entry.pattern, flags);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      if (m.length(0) == 0) continue;
      const auto start = static_cast<std::size_t>(m.position(0));
      entities.push_back({{"label", entry.label},
                          {"text", m.str(0)},
                          {"start", start},
                          {"end", start + static_cast<std::size_t>(m.length(0))},
                          {"score", entry.score}});
    }
  }
  return {200, json{{"entities", entities}}.dump(), {}};
}

}  // namespace vrduqa::mock
