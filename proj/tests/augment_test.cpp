#include <gtest/gtest.h>

#include <set>

#include "comment_judge/augment.hpp"
#include "comment_judge/dataset_io.hpp"
#include "comment_judge/mock_server.hpp"
#include "support/mock_fixtures.hpp"
#include "support/synthetic.hpp"

namespace cj = comment_judge;
using cj::Label;
using cj::RejectReason;

namespace {

cj::CodeCommentPair pair_of(std::string comment, std::string code, std::optional<Label> label = std::nullopt) {
  cj::CodeCommentPair p;
  p.id = "p";
  p.comment_text = std::move(comment);
  p.code_context = std::move(code);
  p.label = label;
  return p;
}

// Scripted in-process endpoint: replies in order, then repeats the last one.
class ScriptedClient final : public cj::ChatClient {
 public:
  explicit ScriptedClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const cj::ChatRequest& r) override {
    std::lock_guard lock(mu_);
    seen.push_back(r);
    const auto i = std::min(calls++, replies_.size() - 1);
    return replies_[i];
  }
  std::size_t calls = 0;
  std::vector<cj::ChatRequest> seen;

 private:
  std::mutex mu_;
  std::vector<std::string> replies_;
};

cj::Dataset small_seed() {
  auto d = cj::testing::synthetic_corpus(20, 77, "seed");
  return cj::stratified_split(d, {}, 3);
}

}  // namespace

TEST(ParseCandidates, WellFormedBlocks) {
  const std::string text = cj::format_pair_block("first", "int a = 1;") +
                           cj::format_pair_block("second\ncontinued", "void f() {\n  g();\n}") + "\n\n";
  const auto c = cj::parse_candidates(text);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_FALSE(c[0].problem);
  EXPECT_EQ(c[0].comment_text, "first");
  EXPECT_EQ(c[0].code_context, "int a = 1;");
  EXPECT_EQ(c[1].comment_text, "second\ncontinued");
  EXPECT_EQ(c[1].code_context, "void f() {\n  g();\n}");
}

TEST(ParseCandidates, Problems) {
  const auto c = cj::parse_candidates("---PAIR---\nCOMMENT: only a comment\n"
                                      "---PAIR---\nCOMMENT:\nCODE:\nint x;\n"
                                      "---PAIR---\nCOMMENT: prose\nCODE:\nthis is not code\n");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].problem, RejectReason::Unparseable);
  EXPECT_EQ(c[1].problem, RejectReason::EmptyField);
  EXPECT_EQ(c[2].problem, RejectReason::Unparseable);

  const auto prose = cj::parse_candidates("Sure! Here are some pairs you might like.");
  ASSERT_EQ(prose.size(), 1u);
  EXPECT_EQ(prose[0].problem, RejectReason::Unparseable);
  EXPECT_TRUE(cj::parse_candidates("  \n\n").empty());
}

TEST(LabelReply, Normalization) {
  EXPECT_EQ(cj::parse_label_reply("Useful"), Label::Useful);
  EXPECT_EQ(cj::parse_label_reply("  not useful."), Label::NotUseful);
  EXPECT_EQ(cj::parse_label_reply("\n**NOT   Useful**\nbecause it restates"), Label::NotUseful);
  EXPECT_EQ(cj::parse_label_reply("useful!"), Label::Useful);
  EXPECT_FALSE(cj::parse_label_reply("maybe"));
  EXPECT_FALSE(cj::parse_label_reply("Useful, mostly"));
  EXPECT_FALSE(cj::parse_label_reply(""));
}

TEST(LabelPair, RepliesAndRetry) {
  cj::GenerativeEndpointConfig cfg;
  cfg.base_url = "http://unused";
  const auto p = pair_of("explain why", "x++;");
  {
    ScriptedClient c({"Useful"});
    EXPECT_EQ(cj::label_pair(cfg, c, p).first, Label::Useful);
    EXPECT_EQ(c.seen.at(0).temperature, 0.0);
  }
  {
    ScriptedClient c({"  not useful."});
    const auto [label, raw] = cj::label_pair(cfg, c, p);
    EXPECT_EQ(label, Label::NotUseful);
    EXPECT_EQ(raw, "  not useful.");
  }
  {
    ScriptedClient c({"maybe", "Useful"});
    EXPECT_EQ(cj::label_pair(cfg, c, p).first, Label::Useful);
    ASSERT_EQ(c.calls, 2u);
    EXPECT_NE(c.seen[1].messages.back().content.find(cj::kStrictLabelInstruction), std::string::npos);
  }
  {
    ScriptedClient c({"maybe", "maybe"});
    try {
      (void)cj::label_pair(cfg, c, p);
      FAIL() << "expected InvalidLabel";
    } catch (const cj::InvalidLabel& e) {
      EXPECT_NE(std::string(e.what()).find("invalid_label"), std::string::npos);
      EXPECT_EQ(e.raw(), "maybe");
      EXPECT_EQ(e.exit_code(), cj::ExitCode::kEndpoint);
    }
    EXPECT_EQ(c.calls, 2u);
  }
}

TEST(GeneratePairs, ThreeWellFormedCandidates) {
  cj::MockFixture f;
  f.generate = {cj::format_pair_block("bounds check keeps reads inside the buffer", "if (i >= n) return -1;") +
                cj::format_pair_block("increment i", "i++;") +
                cj::format_pair_block("flush pending writes before closing", "fflush(fp);")};
  f.label_rules = {{{"increment i"}, "Not Useful"}};
  cj::MockServer server(f);
  const auto cfg = cj::testing::mock_config(server);
  cj::HttpChatClient client(cfg, std::nullopt);
  const auto seed = small_seed();
  const auto b = cj::generate_pairs(cfg, client, 3, seed.pairs, 1);
  ASSERT_EQ(b.accepted.size(), 3u);
  EXPECT_TRUE(b.rejected.empty());
  EXPECT_EQ(b.candidates, 3u);
  EXPECT_EQ(b.accepted[0].id, "gen-000001");
  EXPECT_EQ(b.accepted[2].id, "gen-000003");
  EXPECT_EQ(b.accepted[1].label, Label::NotUseful);
  EXPECT_EQ(b.accepted[0].label, Label::Useful);
  for (const auto& p : b.accepted) EXPECT_EQ(p.source, cj::Source::Generated);
  EXPECT_EQ(server.requests(), 4u);  // one generation + three labels
}

TEST(GeneratePairs, SeedDuplicateRejected) {
  const auto seed = small_seed();
  cj::MockFixture f;
  f.generate = {cj::testing::completion_of({seed.pairs[4]}) +
                cj::format_pair_block("new comment here", "int fresh = 0;")};
  cj::MockServer server(f);
  const auto cfg = cj::testing::mock_config(server);
  cj::HttpChatClient client(cfg, std::nullopt);
  const auto b = cj::generate_pairs(cfg, client, 2, seed.pairs, 1);
  ASSERT_EQ(b.accepted.size(), 1u);
  EXPECT_EQ(b.count(RejectReason::DuplicateOfSeed), 1u);
  EXPECT_EQ(b.rejected[0].comment_text, seed.pairs[4].comment_text);
}

TEST(GeneratePairs, MalformedTextRaises) {
  cj::MockFixture f;
  f.generate_default = "I'm sorry, I can't help with that.";
  cj::MockServer server(f);
  const auto cfg = cj::testing::mock_config(server);
  cj::HttpChatClient client(cfg, std::nullopt);
  try {
    (void)cj::generate_pairs(cfg, client, 3, small_seed().pairs, 1);
    FAIL() << "expected NoAcceptedPairs";
  } catch (const cj::NoAcceptedPairs& e) {
    EXPECT_TRUE(e.batch().accepted.empty());
    EXPECT_EQ(e.batch().count(RejectReason::Unparseable), 1u);
    EXPECT_EQ(e.batch().candidates, 1u);
    EXPECT_NE(std::string(e.what()).find("unparseable"), std::string::npos);
  }
}

TEST(GeneratePairs, WithinBatchDuplicatesAndSurplus) {
  cj::MockFixture f;
  const auto a = cj::format_pair_block("same comment", "int s = 1;");
  f.generate = {a + a + cj::format_pair_block("other", "int o = 2;") + cj::format_pair_block("third", "t();")};
  cj::MockServer server(f);
  auto cfg = cj::testing::mock_config(server);
  cfg.pairs_per_request = 5;
  cj::HttpChatClient client(cfg, std::nullopt);
  const auto b = cj::generate_pairs(cfg, client, 2, small_seed().pairs, 1);
  EXPECT_EQ(b.accepted.size(), 2u);
  EXPECT_EQ(b.count(RejectReason::DuplicateWithinBatch), 1u);
  EXPECT_EQ(b.count(RejectReason::Surplus), 1u);
  EXPECT_EQ(b.accepted.size() + b.rejected.size(), b.candidates);
}

TEST(GeneratePairs, FewShotExamplesComeFromSeed) {
  ScriptedClient c({cj::format_pair_block("c", "x();"), "Useful"});
  cj::GenerativeEndpointConfig cfg;
  cfg.base_url = "http://unused";
  cfg.max_in_flight = 1;
  const auto seed = small_seed();
  (void)cj::generate_pairs(cfg, c, 1, seed.pairs, 9);
  const auto& prompt = c.seen.at(0).messages.at(1).content;
  EXPECT_EQ(prompt.rfind("Batch: 0\n", 0), 0u);
  std::size_t shots = 0;
  for (const auto& p : seed.pairs) shots += prompt.find(p.comment_text) != std::string::npos ? 1 : 0;
  EXPECT_GE(shots, cfg.few_shot);
  EXPECT_EQ(c.seen.at(0).temperature, cfg.generation_temperature);
}

TEST(HttpClient, RetriesServerErrors) {
  cj::MockFixture f;
  f.fail_first = 2;
  f.label_default = "Useful";
  cj::MockServer server(f);
  const auto cfg = cj::testing::mock_config(server);
  cj::HttpChatClient client(cfg, std::nullopt);
  EXPECT_EQ(cj::label_pair(cfg, client, pair_of("c", "x;")).first, Label::Useful);
  EXPECT_EQ(server.requests(), 3u);

  cj::MockFixture down;
  down.fail_first = 100;
  cj::MockServer dead(down);
  auto dcfg = cj::testing::mock_config(dead);
  dcfg.max_retries = 2;
  cj::HttpChatClient dclient(dcfg, std::nullopt);
  EXPECT_THROW((void)cj::label_pair(dcfg, dclient, pair_of("c", "x;")), cj::EndpointError);
  EXPECT_EQ(dead.requests(), 3u);
}

TEST(HttpClient, UnreachableEndpoint) {
  cj::GenerativeEndpointConfig cfg;
  {
    cj::MockServer tmp(cj::MockFixture{});
    cfg = cj::testing::mock_config(tmp);
  }
  cfg.max_retries = 1;
  cj::HttpChatClient client(cfg, std::nullopt);
  try {
    (void)client.complete({{{"user", "hi"}}, 0.0});
    FAIL();
  } catch (const cj::EndpointError& e) {
    EXPECT_EQ(e.exit_code(), cj::ExitCode::kEndpoint);
    EXPECT_NE(std::string(e.what()).find("2 attempts"), std::string::npos);
  }
}

TEST(HttpClient, CredentialRejectedWithoutLeak) {
  const std::string wrong = "sk-wrong-6f1d2c-SHOULD-NOT-LEAK";
  cj::MockFixture f;
  f.require_api_key = "sk-right";
  cj::MockServer server(f);
  const auto cfg = cj::testing::mock_config(server);
  cj::HttpChatClient client(cfg, wrong);
  try {
    (void)cj::label_pair(cfg, client, pair_of("c", "x;"));
    FAIL();
  } catch (const cj::AuthenticationError& e) {
    EXPECT_EQ(e.exit_code(), cj::ExitCode::kEndpoint);
    EXPECT_EQ(std::string(e.what()).find(wrong), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(cj::kApiKeyEnv), std::string::npos);
  }
  EXPECT_EQ(server.requests(), 1u);  // 401 is not retried
  EXPECT_EQ(server.authorizations().at(0), "Bearer " + wrong);
}

TEST(HttpClient, BaseUrlPath) {
  EXPECT_EQ(cj::detail::split_base_url("http://h:8/api/").path_prefix, "/api");
  EXPECT_EQ(cj::detail::split_base_url("http://h:8").scheme_host_port, "http://h:8");
  EXPECT_THROW(cj::detail::split_base_url("ftp://h"), cj::UsageError);
  EXPECT_THROW(cj::detail::split_base_url("h:8"), cj::UsageError);
  cj::GenerativeEndpointConfig none;
  EXPECT_THROW(none.validate(), cj::UsageError);
}

TEST(Augmentation, TargetZeroIsIdentity) {
  ScriptedClient c({"unused"});
  cj::GenerativeEndpointConfig cfg;
  const auto seed = small_seed();
  const auto r = cj::augmentation_pipeline(cfg, c, seed, 0, 1);
  EXPECT_EQ(r.dataset, seed);
  EXPECT_TRUE(r.generated.pairs.empty());
  EXPECT_EQ(c.calls, 0u);
}

TEST(Augmentation, TargetTen) {
  cj::MockServer server(cj::testing::synthetic_fixture(4, 5, 901));
  const auto cfg = cj::testing::mock_config(server);
  cj::HttpChatClient client(cfg, std::nullopt);
  const auto seed = small_seed();
  cj::AuditLog audit;
  const auto r = cj::augmentation_pipeline(cfg, client, seed, 10, 1, &audit);
  EXPECT_EQ(r.status, cj::AugmentationStatus::Complete);
  EXPECT_EQ(r.dataset.pairs.size(), seed.pairs.size() + 10);
  EXPECT_EQ(r.dataset.counts().count(std::nullopt, cj::Source::Generated), 10u);
  EXPECT_EQ(r.generated.pairs.size(), 10u);
  // Seed pairs keep their order and content at the front.
  EXPECT_TRUE(std::equal(seed.pairs.begin(), seed.pairs.end(), r.dataset.pairs.begin()));
  for (const auto& p : r.generated.pairs) EXPECT_EQ(p.split, cj::Split::Train);
  EXPECT_EQ(audit.entries().size(), r.requests);
  EXPECT_EQ(r.requests, 2u + 10u);
  EXPECT_EQ(r.rejected(RejectReason::Surplus), 0u);
}

TEST(Augmentation, HygieneProperties) {
  // Fixture mixing seed regurgitation, repeats, malformed blocks and fresh pairs.
  const auto seed = small_seed();
  auto f = cj::testing::synthetic_fixture(6, 4, 555);
  f.generate[0] += cj::testing::completion_of({seed.pairs[0], seed.pairs[1]});
  f.generate[1] += f.generate[0];
  f.generate[2] += "---PAIR---\nCOMMENT: broken\n";
  cj::MockServer server(f);
  auto cfg = cj::testing::mock_config(server);
  cfg.pairs_per_request = 4;
  cj::HttpChatClient client(cfg, std::nullopt);
  const auto r = cj::augmentation_pipeline(cfg, client, seed, 15, 4);
  ASSERT_EQ(r.generated.pairs.size(), 15u);

  std::set<std::uint64_t> seed_keys, gen_keys;
  for (const auto& p : seed.pairs) seed_keys.insert(cj::duplicate_key(p));
  for (const auto& p : r.generated.pairs) {
    EXPECT_FALSE(seed_keys.contains(cj::duplicate_key(p)));
    EXPECT_TRUE(gen_keys.insert(cj::duplicate_key(p)).second);
    EXPECT_EQ(p.source, cj::Source::Generated);
    EXPECT_TRUE(p.label.has_value());
  }
  std::size_t rejected = 0;
  for (auto reason : cj::kAllRejectReasons) rejected += r.rejected(reason);
  EXPECT_EQ(r.generated.pairs.size() + rejected, r.candidates);
  EXPECT_GE(r.rejected(RejectReason::DuplicateOfSeed), 2u);
  EXPECT_GE(r.rejected(RejectReason::DuplicateWithinBatch), 1u);
  EXPECT_GE(r.rejected(RejectReason::Unparseable), 1u);
}

TEST(Augmentation, BudgetExhausted) {
  cj::MockFixture f;
  f.generate_default = "no pairs today";
  cj::MockServer server(f);
  const auto cfg = cj::testing::mock_config(server);
  cj::HttpChatClient client(cfg, std::nullopt);
  const auto seed = small_seed();
  const auto r = cj::augmentation_pipeline(cfg, client, seed, 4, 1);
  EXPECT_EQ(r.status, cj::AugmentationStatus::BudgetExhausted);
  EXPECT_EQ(r.requests, 12u);
  EXPECT_EQ(server.requests(), 12u);
  EXPECT_EQ(r.dataset, seed);
  EXPECT_EQ(cj::summary_json(r, 4).at("status"), "budget_exhausted");
}

TEST(Augmentation, UnlabeledSeedRejected) {
  ScriptedClient c({"unused"});
  cj::GenerativeEndpointConfig cfg;
  cfg.base_url = "http://unused";
  auto seed = small_seed();
  seed.pairs[3].label.reset();
  EXPECT_THROW((void)cj::augmentation_pipeline(cfg, c, seed, 2, 1), cj::DataError);
}

TEST(Augmentation, ByteReproducible) {
  const auto seed = small_seed();
  const auto run = [&] {
    cj::MockServer server(cj::testing::synthetic_fixture(8, 5, 31));
    auto cfg = cj::testing::mock_config(server);
    cfg.max_in_flight = 4;
    cj::HttpChatClient client(cfg, std::nullopt);
    cj::AuditLog audit;
    const auto r = cj::augmentation_pipeline(cfg, client, seed, 25, 12, &audit);
    std::string digests;
    for (const auto& e : audit.entries()) digests += e.request_digest + e.response_digest + e.outcome + "\n";
    return std::make_pair(cj::serialize_dataset(r.dataset, cj::DatasetFormat::Jsonl) +
                              cj::summary_json(r, 25).dump(),
                          digests);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Augmentation, CredentialNeverPersisted) {
  const std::string key = "sk-live-9a8b7c6d5e4f-DO-NOT-WRITE";
  auto f = cj::testing::synthetic_fixture(2, 5, 8);
  f.require_api_key = key;
  cj::MockServer server(f);
  const auto cfg = cj::testing::mock_config(server);
  cj::HttpChatClient client(cfg, key);
  cj::AuditLog audit;
  const auto seed = small_seed();
  const auto r = cj::augmentation_pipeline(cfg, client, seed, 5, 1, &audit);
  ASSERT_EQ(r.generated.pairs.size(), 5u);
  for (const auto& a : server.authorizations()) EXPECT_EQ(a, "Bearer " + key);
  const std::string everything = audit.to_jsonl() + cj::summary_json(r, 5).dump() +
                                 cj::serialize_dataset(r.dataset, cj::DatasetFormat::Jsonl) +
                                 cj::to_json(cfg).dump();
  EXPECT_EQ(everything.find(key), std::string::npos);
  EXPECT_EQ(everything.find("sk-live"), std::string::npos);
}

TEST(AuditLog, OneLinePerRequest) {
  cj::MockServer server(cj::testing::synthetic_fixture(1, 3, 2));
  const auto cfg = cj::testing::mock_config(server);
  cj::HttpChatClient client(cfg, std::nullopt);
  cj::AuditLog audit;
  (void)cj::augmentation_pipeline(cfg, client, small_seed(), 3, 1, &audit);
  const auto text = audit.to_jsonl();
  std::size_t lines = 0, pos = 0;
  for (std::size_t nl; (nl = text.find('\n', pos)) != std::string::npos; pos = nl + 1, ++lines) {
    const auto j = nlohmann::json::parse(text.substr(pos, nl - pos));
    EXPECT_EQ(j.at("sequence"), lines);
    EXPECT_EQ(j.at("kind"), lines == 0 ? "generate_pairs" : "label_pair");
    EXPECT_EQ(j.at("outcome"), "ok");
    EXPECT_EQ(j.at("request_digest").get<std::string>().size(), 16u);
    EXPECT_EQ(j.at("timestamp").get<std::string>().back(), 'Z');
  }
  EXPECT_EQ(lines, 4u);
  EXPECT_EQ(server.requests(), 4u);
}

TEST(MockFixture, ParsingAndReplies) {
  const auto f = cj::parse_mock_fixture(nlohmann::json::parse(
      R"({"generate":["zero","one"],"generate_default":"dflt",
          "label_rules":[{"contains":["alpha","beta"],"reply":"Useful"},{"contains":"alpha","reply":"Not Useful"}],
          "label_default":"maybe"})"));
  const auto req = [](std::string_view system, const std::string& user) {
    return cj::request_body("m", {{{"system", std::string(system)}, {"user", user}}, 0.0});
  };
  EXPECT_EQ(cj::mock_reply(f, req(cj::kGenerateSystemPrompt, "Batch: 1\nwrite")), "one");
  EXPECT_EQ(cj::mock_reply(f, req(cj::kGenerateSystemPrompt, "Batch: 7\nwrite")), "dflt");
  EXPECT_EQ(cj::mock_reply(f, req(cj::kLabelSystemPrompt, "alpha beta")), "Useful");
  EXPECT_EQ(cj::mock_reply(f, req(cj::kLabelSystemPrompt, "alpha")), "Not Useful");
  EXPECT_EQ(cj::mock_reply(f, req(cj::kLabelSystemPrompt, "gamma")), "maybe");
  EXPECT_THROW(cj::parse_mock_fixture(nlohmann::json::parse(R"({"generate":3})")), cj::DataError);
}
