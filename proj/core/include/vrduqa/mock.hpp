#pragma once

// Deterministic in-process stand-ins for the HTTP providers, driven by a
// scripted transcript. They speak the same wire formats as the real services
// (chat completions, NER), so the whole client stack is exercised in mock mode.
//
// Script layout:
//   {"providers": {"<name>": {"rules": [...]} | {"lexicon": [...]}}}
//
// Chat rules are tried in order against the request text (system + user):
//   contains   string or list; all must occur
//   regex      ECMAScript search; captures usable as $1..$9 in "response"
//   icase      case-insensitive regex
//   times      rule applies to its first N matches only
// and produce exactly one of:
//   status        HTTP status to fail with
//   response      fixed text (with $n substitution)
//   choices       list; one picked by a hash of the request
//   bernoulli     {rate, yes:[...], no:[...]}; yes with probability `rate`
//                 over request hashes
//   decode_image  true; text embedded in the first attached image
// No matching rule answers HTTP 404.
//
// NER lexicon entries: {label, pattern, score, icase}.

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vrduqa/providers.hpp"

namespace vrduqa::mock {

struct MockRule {
  std::vector<std::string> contains;
  std::string regex;
  bool icase = false;
  int times = -1;  // -1 = unlimited
  int status = 0;
  std::optional<std::string> response;
  std::vector<std::string> choices;
  std::optional<double> bernoulli_rate;
  std::vector<std::string> yes;
  std::vector<std::string> no;
  bool decode_image = false;
};

struct LexiconEntry {
  std::string label;
  std::string pattern;
  double score = 0.9;
  bool icase = false;
};

struct MockProviderScript {
  std::vector<MockRule> rules;
  std::vector<LexiconEntry> lexicon;
};

struct MockScript {
  std::map<std::string, MockProviderScript> providers;

  static MockScript parse(const json& j);
  static MockScript load(const fs::path& path);
  bool has(const std::string& provider) const { return providers.count(provider) > 0; }
};

class MockEndpoint final : public providers::Endpoint {
 public:
  MockEndpoint(std::string provider_name, providers::ProviderType type, MockProviderScript script);

  providers::HttpReply post(const json& body, const std::map<std::string, std::string>& headers,
                            double timeout_s) override;
  std::size_t calls() const;

 private:
  providers::HttpReply chat(const json& body);
  providers::HttpReply ner(const json& body);

  std::string name_;
  providers::ProviderType type_;
  MockProviderScript script_;
  mutable std::mutex mu_;
  std::vector<int> hits_;
  std::size_t calls_ = 0;
};

}  // namespace vrduqa::mock
