#include <cstdio>

int main() {
  std::puts("bcl: subcommands not wired up yet");
  return 1;
}
