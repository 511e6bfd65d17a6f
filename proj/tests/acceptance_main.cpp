// Acceptance runner: executes every acceptance criterion and prints one
// PASS/FAIL line per criterion.

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>

namespace {

struct CriterionReporter : doctest::IReporter {
  const doctest::TestCaseData* current = nullptr;

  explicit CriterionReporter(const doctest::ContextOptions&) {}

  void report_query(const doctest::QueryData&) override {}
  void test_run_start() override {}
  void test_run_end(const doctest::TestRunStats& s) override {
    std::printf("%u/%u criteria passed\n",
                static_cast<unsigned>(s.numTestCases - s.numTestCasesFailed),
                static_cast<unsigned>(s.numTestCases));
  }
  void test_case_start(const doctest::TestCaseData& d) override { current = &d; }
  void test_case_reenter(const doctest::TestCaseData&) override {}
  void test_case_end(const doctest::CurrentTestCaseStats& s) override {
    std::printf("[%s] %s\n", s.failure_flags == 0 ? "PASS" : "FAIL", current->m_name);
    std::fflush(stdout);
  }
  void test_case_exception(const doctest::TestCaseException&) override {}
  void subcase_start(const doctest::SubcaseSignature&) override {}
  void subcase_end() override {}
  void log_assert(const doctest::AssertData& a) override {
    if (!a.m_failed) return;
    std::printf("  assertion failed: %s:%d  %s\n", a.m_file, a.m_line, a.m_expr);
    std::fflush(stdout);
  }
  void log_message(const doctest::MessageData& m) override {
    std::printf("  %s\n", m.m_string.c_str());
    std::fflush(stdout);
  }
  void test_case_skipped(const doctest::TestCaseData&) override {}
};

}  // namespace

REGISTER_LISTENER("criterion", 1, CriterionReporter);

int main(int argc, char** argv) {
  doctest::Context ctx;
  ctx.setOption("no-intro", true);
  ctx.setOption("duration", true);
  ctx.applyCommandLine(argc, argv);
  return ctx.run();
}
