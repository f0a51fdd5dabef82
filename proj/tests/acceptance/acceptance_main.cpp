#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pulselock/acceptance.hpp"

int main(int argc, char** argv) {
  pulselock::acceptance::Options options;
  if (argc > 1) options.work_dir = argv[1];
  const auto results = pulselock::acceptance::run_all(options);

  std::ofstream report("acceptance_report.txt", std::ios::binary);
  int unexpected = 0;
  for (const auto& r : results) {
    const auto line = pulselock::acceptance::format_line(r);
    std::printf("%s\n", line.c_str());
    report << line << '\n';
    if (r.id > 0 && !r.passed && !r.known_red) ++unexpected;
  }
  std::printf("%d unexpected failure(s)\n", unexpected);
  return unexpected == 0 ? 0 : 1;
}
