// Finds the classical symmetry algebra of the heat operator over a quadratic
// ansatz and closes it under brackets.

#include <iostream>

#include <diffsym/diffsym.hpp>

using namespace diffsym;

int main() {
    CoordinateSystem cs({"x"}, "t");
    auto P = [&](const char* s) { return parse_expr(s, cs); };

    SymExprMatrix a(1);
    a.set(0, 0, P("1"));
    Diffusor heat = Diffusor::standard(cs, a, {P("0")});

    AnsatzBasis basis(cs, {P("1"), P("x"), P("t"), P("t*x"), P("x^2"), P("t^2")},
                      {P("1"), P("t"), P("t^2")});
    std::vector<ProjectableVectorField> sym = find_symmetries(heat, basis);

    std::cout << "operator: d_t + d_xx acting on (t, x)\n";
    std::cout << "symmetry algebra dimension: " << sym.size() << "\n\n";
    for (std::size_t i = 0; i < sym.size(); ++i) {
        SymmetryVerdict v = check_symmetry(sym[i], heat);
        std::cout << "X" << i + 1 << ":  phi = " << to_string(sym[i].phi()[0])
                  << ",  tau = " << to_string(sym[i].tau()) << ",  mu = " << to_string(v.mu)
                  << "\n";
    }

    std::cout << "\nbracket table (coefficients in the found generators):\n";
    for (std::size_t i = 0; i < sym.size(); ++i)
        for (std::size_t j = i + 1; j < sym.size(); ++j) {
            VectorField br = bracket(sym[i].as_vector_field(), sym[j].as_vector_field());
            std::cout << "[X" << i + 1 << ", X" << j + 1 << "] = (tau = " << to_string(br.comp[0])
                      << ", phi = " << to_string(br.comp[1]) << ")\n";
        }

    std::cout << "\nthe galilean boost t*d_x is not in the algebra:\n";
    SymmetryVerdict boost = check_symmetry(ProjectableVectorField(cs, {P("t")}, P("0")), heat);
    std::cout << "  is_symmetry = " << std::boolalpha << boost.is_symmetry
              << ", drift residual = " << to_string(boost.residuals[1]) << "\n";
    return 0;
}
