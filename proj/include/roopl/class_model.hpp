#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roopl/ast.hpp"

namespace roopl {

struct VTableSlot {
    std::string method;
    std::string owner; // class whose implementation fills the slot
    bool operator==(const VTableSlot&) const = default;
};

struct ResolvedMethod {
    std::string name;
    std::string owner;              // declaring class
    const MethodDecl* decl = nullptr;
};

struct ClassInfo {
    const ClassDecl* decl = nullptr;
    std::optional<std::string> base;
    // Field resolution: own fields first, then the base chain.
    std::vector<Field> resolved_fields;
    // One entry per method name; override replaces the base entry.
    std::vector<ResolvedMethod> resolved_methods;
    // Layout: vtable pointer at offset 0, fields at 1..size-1, base-first so
    // inherited fields keep their offsets in every subclass (prefixing).
    std::vector<VTableSlot> vtable;
    std::vector<Field> layout_fields;      // base-first order
    std::map<std::string, int> field_offset;
    int size = 1; // cells: 1 + number of resolved fields
};

class ClassModel {
public:
    std::map<std::string, ClassInfo> classes;
    std::string main_class;
    const MethodDecl* main_method = nullptr;

    const ClassInfo& info(const std::string& name) const { return classes.at(name); }
    bool has_class(const std::string& name) const { return classes.count(name) > 0; }

    // Reflexive-transitive closure of the inherits relation.
    bool subtype(const std::string& derived, const std::string& base) const {
        const std::string* cur = &derived;
        while (true) {
            if (*cur == base)
                return true;
            auto it = classes.find(*cur);
            if (it == classes.end() || !it->second.base)
                return false;
            cur = &*it->second.base;
        }
    }

    // Nil is a subtype of every class type; Int only of itself.
    bool subtype(const Type& a, const Type& b) const {
        if (a.is_int() || b.is_int())
            return a == b;
        if (a.is_nil())
            return true;
        if (b.is_nil())
            return false;
        return subtype(a.class_name, b.class_name);
    }

    const ResolvedMethod* find_method(const std::string& cls, const std::string& method) const {
        auto it = classes.find(cls);
        if (it == classes.end())
            return nullptr;
        for (const auto& m : it->second.resolved_methods)
            if (m.name == method)
                return &m;
        return nullptr;
    }

    int vtable_slot(const std::string& cls, const std::string& method) const {
        const auto& vt = classes.at(cls).vtable;
        for (std::size_t i = 0; i < vt.size(); ++i)
            if (vt[i].method == method)
                return static_cast<int>(i);
        return -1;
    }
};

namespace detail {

inline bool same_signature(const MethodDecl& a, const MethodDecl& b) {
    if (a.params.size() != b.params.size())
        return false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
        if (a.params[i].type != b.params[i].type)
            return false;
    return true;
}

class ClassAnalyzer {
public:
    explicit ClassAnalyzer(const Program& prog) : prog_(prog) {}

    std::optional<ClassModel> run(std::vector<Diagnostic>& diags) {
        index_classes(diags);
        if (!diags.empty())
            return std::nullopt;
        check_hierarchy(diags);
        if (!diags.empty())
            return std::nullopt;
        for (const auto& cls : prog_.classes)
            resolve(cls.name, diags);
        if (!diags.empty())
            return std::nullopt;
        locate_main(diags);
        if (!diags.empty())
            return std::nullopt;
        return std::move(model_);
    }

private:
    const Program& prog_;
    ClassModel model_;
    std::set<std::string> resolved_;

    void index_classes(std::vector<Diagnostic>& diags) {
        for (const auto& cls : prog_.classes) {
            if (model_.classes.count(cls.name)) {
                diags.push_back({cls.loc, "DuplicateClassName",
                                 "class '" + cls.name + "' is declared more than once"});
                continue;
            }
            ClassInfo info;
            info.decl = &cls;
            info.base = cls.base;
            model_.classes.emplace(cls.name, std::move(info));

            std::set<std::string> field_names;
            for (const auto& f : cls.fields)
                if (!field_names.insert(f.name).second)
                    diags.push_back({f.loc, "DuplicateField",
                                     "duplicate field '" + f.name + "' in class '" + cls.name +
                                         "'"});
            std::set<std::string> method_names;
            for (const auto& m : cls.methods)
                if (!method_names.insert(m.name).second)
                    diags.push_back({m.loc, "DuplicateMethod",
                                     "duplicate method '" + m.name + "' in class '" + cls.name +
                                         "' (overloading is not supported)"});
        }
    }

    void check_hierarchy(std::vector<Diagnostic>& diags) {
        for (const auto& cls : prog_.classes) {
            if (cls.base && !model_.classes.count(*cls.base)) {
                diags.push_back({cls.loc, "UnknownBaseClass",
                                 "class '" + cls.name + "' inherits unknown class '" + *cls.base +
                                     "'"});
                continue;
            }
            // Walk the chain looking for a cycle through this class.
            std::set<std::string> seen{cls.name};
            const ClassDecl* cur = &cls;
            while (cur->base) {
                const auto it = model_.classes.find(*cur->base);
                if (it == model_.classes.end())
                    break;
                if (!seen.insert(*cur->base).second) {
                    diags.push_back({cls.loc, "InheritanceCycle",
                                     "inheritance cycle involving class '" + cls.name + "'"});
                    break;
                }
                cur = it->second.decl;
            }
        }
    }

    void resolve(const std::string& name, std::vector<Diagnostic>& diags) {
        if (resolved_.count(name))
            return;
        resolved_.insert(name);
        ClassInfo& info = model_.classes.at(name);
        const ClassDecl& decl = *info.decl;

        if (info.base) {
            resolve(*info.base, diags);
            const ClassInfo& base = model_.classes.at(*info.base);

            // fields(cl) = eta(cl) followed by fields(base); shadowing is an error.
            std::set<std::string> inherited;
            for (const auto& f : base.resolved_fields)
                inherited.insert(f.name);
            for (const auto& f : decl.fields) {
                if (inherited.count(f.name))
                    diags.push_back({f.loc, "FieldShadowsInherited",
                                     "field '" + f.name + "' in class '" + name +
                                         "' shadows an inherited field"});
                info.resolved_fields.push_back(f);
            }
            for (const auto& f : base.resolved_fields)
                info.resolved_fields.push_back(f);

            // methods(cl) = delta(cl) (+) methods(base): keep the base method
            // unless the derived class declares one with the same name.
            info.vtable = base.vtable;
            info.resolved_methods = base.resolved_methods;
            for (const auto& m : decl.methods) {
                bool overrides = false;
                for (auto& rm : info.resolved_methods) {
                    if (rm.name != m.name)
                        continue;
                    overrides = true;
                    if (!same_signature(*rm.decl, m))
                        diags.push_back({m.loc, "OverrideSignatureMismatch",
                                         "method '" + m.name + "' in class '" + name +
                                             "' overrides a method with a different signature"});
                    rm.owner = name;
                    rm.decl = &m;
                    for (auto& slot : info.vtable)
                        if (slot.method == m.name)
                            slot.owner = name;
                }
                if (!overrides) {
                    info.resolved_methods.push_back({m.name, name, &m});
                    info.vtable.push_back({m.name, name});
                }
            }

            // Layout: base fields keep their offsets, new fields appended.
            info.layout_fields = base.layout_fields;
            for (const auto& f : decl.fields)
                info.layout_fields.push_back(f);
        } else {
            info.resolved_fields = decl.fields;
            info.layout_fields = decl.fields;
            for (const auto& m : decl.methods) {
                info.resolved_methods.push_back({m.name, name, &m});
                info.vtable.push_back({m.name, name});
            }
        }

        info.size = 1 + static_cast<int>(info.layout_fields.size());
        for (std::size_t i = 0; i < info.layout_fields.size(); ++i)
            info.field_offset[info.layout_fields[i].name] = static_cast<int>(i) + 1;

        // Field and parameter types must name known classes.
        for (const auto& f : decl.fields)
            if (f.type.is_class() && !model_.classes.count(f.type.class_name))
                diags.push_back({f.loc, "UnknownClass",
                                 "field '" + f.name + "' has unknown type '" +
                                     f.type.class_name + "'"});
        for (const auto& m : decl.methods)
            for (const auto& p : m.params)
                if (p.type.is_class() && !model_.classes.count(p.type.class_name))
                    diags.push_back({p.loc, "UnknownClass",
                                     "parameter '" + p.name + "' has unknown type '" +
                                         p.type.class_name + "'"});
    }

    void locate_main(std::vector<Diagnostic>& diags) {
        // Exactly one class may declare its own nullary main; an inherited
        // main does not count as a new declaration.
        for (const auto& cls : prog_.classes) {
            for (const auto& m : cls.methods) {
                if (m.name != "main" || !m.params.empty())
                    continue;
                if (!model_.main_class.empty()) {
                    diags.push_back({m.loc, "MultipleMain",
                                     "nullary method 'main' declared in both '" +
                                         model_.main_class + "' and '" + cls.name + "'"});
                    return;
                }
                model_.main_class = cls.name;
                model_.main_method = &m;
            }
        }
        if (model_.main_class.empty())
            diags.push_back({{}, "NoMain", "program has no class with a nullary method 'main'"});
    }
};

} // namespace detail

// The program must outlive the returned model (it holds declaration pointers).
inline std::optional<ClassModel> build_class_model(const Program& prog,
                                                   std::vector<Diagnostic>& diags) {
    return detail::ClassAnalyzer(prog).run(diags);
}

// Stable line-oriented dump of vtable slots and field offsets, in program
// declaration order.
inline std::string dump_layout(const ClassModel& model, const Program& prog) {
    std::ostringstream out;
    for (const auto& cls : prog.classes) {
        const ClassInfo& info = model.info(cls.name);
        out << "class " << cls.name << " size " << info.size << "\n";
        for (std::size_t slot = 0; slot < info.vtable.size(); ++slot)
            out << "  vtable " << slot << " " << info.vtable[slot].method << " "
                << info.vtable[slot].owner << "\n";
        for (const auto& f : info.layout_fields)
            out << "  field " << info.field_offset.at(f.name) << " " << f.name << " "
                << to_string(f.type) << "\n";
    }
    return out.str();
}

} // namespace roopl
