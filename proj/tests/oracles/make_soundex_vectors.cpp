// Writes the Soundex vector file used by the tests. Codes come from the
// reference oracle; the program refuses to write if the oracle disagrees with
// the codes printed in the National Archives coding guide.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "soundex_oracle.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_soundex_vectors <output.csv>\n";
    return 2;
  }
  const std::vector<std::pair<std::string, std::string>> published = {
      {"Robert", "R163"},    {"Rupert", "R163"},   {"Rubin", "R150"},     {"Ashcraft", "A261"},
      {"Ashcroft", "A261"},  {"Tymczak", "T522"},  {"Pfister", "P236"},   {"Honeyman", "H555"},
      {"Lee", "L000"},       {"Gutierrez", "G362"}, {"Jackson", "J250"},  {"Washington", "W252"},
      {"Lloyd", "L300"},     {"Lukasiewicz", "L222"}, {"Euler", "E460"},  {"Gauss", "G200"},
      {"Hilbert", "H416"},   {"Knuth", "K530"},    {"Ellery", "E460"},    {"Heilbronn", "H416"},
  };
  for (const auto& [name, code] : published) {
    if (oracle::soundex(name) != code) {
      std::cerr << name << ": oracle gives " << oracle::soundex(name) << ", guide gives " << code << "\n";
      return 1;
    }
  }
  std::ofstream out(argv[1], std::ios::binary);
  out << "name,code\n";
  for (const auto& [name, code] : published) out << name << ',' << oracle::soundex(name) << '\n';
  return out ? 0 : 1;
}
