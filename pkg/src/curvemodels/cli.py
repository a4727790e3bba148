"""Command-line interface: configuration parsing, artifact persistence,
and the commands space / newforms / orbits / qexp / model / map / verify.

Exit codes: 0 success, 1 configuration or validation error, 2 computation
failure, 3 verification mismatch.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import sympy

from . import __version__
from .groups import IntMat2, ModMat2, group_closure
from .newforms import newform_decomposition, qexp_from_eigendata
from .orbits import build_all_orbits
from .pipeline import (CurveModel, PipelineConfig, PrecisionError,
                       algorithm1, algorithm2, chen_j_denominator,
                       chen_j_numerator, find_map, hauptmodul_solve,
                       polynomial_string, quotient_map_degree)
from .series import QExpansion, scalar_to_json
from .symbols import build_space

FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


def parse_config(text):
    """PipelineConfig from a JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("config is not valid JSON: %s" % e)
    for key in ("M", "K", "group"):
        if key not in doc:
            raise ConfigError("config is missing the %r field" % key)
    M, K = int(doc["M"]), int(doc["K"])
    gdoc = doc["group"]
    if gdoc.get("level") != M * K:
        raise ConfigError("group level must equal M*K = %d" % (M * K))
    group = group_closure(M * K, [ModMat2(M * K, *g, check=True)
                                  for g in gdoc["generators"]])
    gammas = [IntMat2(*g) for g in doc.get("gamma_generators", [])]
    autos = []
    for a in doc.get("automorphisms", []):
        if a.get("denominator", 1) != 1:
            raise ConfigError("fractional automorphism generators are not "
                              "supported; scale to an integral matrix")
        autos.append(IntMat2(*a["matrix"]))
    config = PipelineConfig(M, K, group, gammas, autos,
                            prec=doc.get("prec"))
    try:
        config.validate()
    except ValueError as e:
        raise ConfigError(str(e))
    return config


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# Artifact persistence


def _digest(payload):
    return hashlib.sha256(payload.encode()).hexdigest()


def persist(doc, path):
    doc = dict(doc)
    doc["format_version"] = FORMAT_VERSION
    body = json.dumps(doc, indent=1, sort_keys=True)
    doc["digest"] = _digest(body)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    return doc["digest"]


def load(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError("unsupported artifact format version")
    digest = doc.pop("digest", None)
    if digest != _digest(json.dumps(doc, indent=1, sort_keys=True)):
        raise ValueError("artifact digest mismatch (corrupted file)")
    return doc


def write_manifest(outdir, config_doc, artifacts, prec, h, started):
    manifest = {
        "version": __version__,
        "config": config_doc,
        "precision": prec,
        "h": h,
        "seconds": round(time.time() - started, 3),
        "artifacts": artifacts,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def _qexp_doc(f):
    return f.to_json()


# ---------------------------------------------------------------------------
# Commands


def cmd_space(config, args, outdir):
    space = build_space(config.M, config.K)
    plus, _ = space.plus_basis()
    print("level %d = %d * %d^2" % (space.N, config.M, config.K))
    print("cuspidal dimension: %d" % space.cuspidal_dim)
    print("plus subspace dimension: %d" % plus.cols)
    digest = persist({
        "level": space.N, "M": config.M, "K": config.K,
        "cuspidal_dimension": space.cuspidal_dim,
        "plus_dimension": plus.cols,
    }, os.path.join(outdir, "space.json"))
    return {"space.json": digest}


def cmd_newforms(config, args, outdir):
    prec = args.prec or 11
    levels = [L for L in sympy.divisors(config.M * config.K ** 2) if L >= 11]
    out = []
    for L in levels:
        for sysm in newform_decomposition(L):
            f = qexp_from_eigendata(sysm, prec)
            out.append({
                "level": L,
                "degree": sysm.degree,
                "newform": f.to_json(),
            })
            print("level %d: degree %d, a2 = %s" % (
                L, sysm.degree, f.an[1] if len(f.an) > 1 else "?"))
    digest = persist({"newforms": out, "prec": prec},
                     os.path.join(outdir, "newforms.json"))
    return {"newforms.json": digest}


def cmd_orbits(config, args, outdir):
    prec = args.prec or 11
    space = build_space(config.M, config.K)
    orbits = build_all_orbits(space)
    out = []
    for orb in orbits:
        entries = []
        for e in orb.entries:
            entries.append({
                "character": e.character.to_json(),
                "new_level": e.new_level,
                "divisor": e.divisor,
                "symbol": [scalar_to_json(x) for x in e.symbol],
                "qexp": _qexp_doc(e.qexp(prec)),
            })
        out.append({"label": orb.seed.label, "dimension": orb.dimension(),
                    "entries": entries})
        print("%s: dimension %d, %d entries"
              % (orb.seed.label, orb.dimension(), len(entries)))
    total = sum(o.dimension() for o in orbits)
    print("total dimension: %d" % total)
    digest = persist({"orbits": out, "total_dimension": total},
                     os.path.join(outdir, "orbits.json"))
    return {"orbits.json": digest}


def cmd_qexp(config, args, outdir):
    fs = algorithm1(config, prec=args.prec)
    print("fixed space dimension (genus): %d" % fs.genus)
    for f in fs.basis:
        print(" ", _short_qexp(f))
    digest = persist({
        "genus": fs.genus, "prec": fs.prec,
        "basis": [_qexp_doc(f) for f in fs.basis],
    }, os.path.join(outdir, "qexp.json"))
    return {"qexp.json": digest}, fs


def cmd_model(config, args, outdir):
    model = algorithm2(config, prec=args.prec)
    doc = {
        "genus": model.genus,
        "prec": model.prec,
        "manifest": model.manifest,
        "basis": [_qexp_doc(f) for f in model.basis],
    }
    if model.hyperelliptic is not None:
        doc["hyperelliptic"] = [str(c) for c in model.hyperelliptic]
        print("genus %d hyperelliptic model, y^2 = f(x) with f ="
              % model.genus)
        xs = sympy.symbols("x")
        print(" ", sympy.Poly([sympy.Rational(str(c)) for c in
                               reversed(model.hyperelliptic)], xs).as_expr())
    else:
        doc["degree"] = model.degree
        doc["polynomials"] = [
            {"monomials": [list(m) for m in sorted(p)],
             "coefficients": [int(p[m]) for m in sorted(p)]}
            for p in model.polynomials
        ]
        print("genus %d model cut out by %d polynomials of degree %d"
              % (model.genus, len(model.polynomials), model.degree))
        for p in model.polynomials:
            print(" ", polynomial_string(p))
    digest = persist(doc, os.path.join(outdir, "model.json"))
    return {"model.json": digest}


def cmd_map(config, args, outdir):
    prec = args.prec or 13
    fs = algorithm1(config, prec=max(prec, 13))
    from .pipeline import rational_fixed_basis
    basis = rational_fixed_basis(fs)
    target = hauptmodul_solve(prec)
    m = find_map(basis, target, prec=prec)
    m.map_degree = quotient_map_degree(config, 21)
    print("map of polynomial degree %d found at series precision %d"
          % (m.degree, prec))
    print("numerator:  ", polynomial_string(m.numerator))
    print("denominator:", polynomial_string(m.denominator))
    print("degree of the induced covering: %d" % m.map_degree)
    digest = persist({
        "degree": m.degree,
        "map_degree": m.map_degree,
        "numerator": {"monomials": [list(k) for k in sorted(m.numerator)],
                      "coefficients": [int(m.numerator[k])
                                       for k in sorted(m.numerator)]},
        "denominator": {"monomials": [list(k) for k in sorted(m.denominator)],
                        "coefficients": [int(m.denominator[k])
                                         for k in sorted(m.denominator)]},
        "hauptmodul": _qexp_doc(target),
    }, os.path.join(outdir, "map.json"))
    return {"map.json": digest}


def cmd_verify(config, args, outdir):
    from .regression import run_regression
    results = run_regression(verbose=True)
    failures = [name for name, ok, _ in results if not ok]
    digest = persist({
        "results": [{"criterion": n, "passed": ok, "detail": d}
                    for n, ok, d in results],
    }, os.path.join(outdir, "verify.json"))
    if failures:
        print("FAILED: %s" % ", ".join(failures))
        return {"verify.json": digest}, 3
    print("all criteria passed")
    return {"verify.json": digest}, 0


def _short_qexp(f, terms=4):
    parts = []
    for n in range(f.val, min(f.prec, f.val + terms)):
        parts.append("(%s)q^%d" % (f.coefficient(n), n))
    return " + ".join(parts) + " + O(q^%d)" % f.prec


# ---------------------------------------------------------------------------
# Entry point


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="curvemodels",
        description="Exact models over Q for quotients of modular curves "
                    "and q-expansion bases of fixed cusp-form spaces.")
    parser.add_argument("command",
                        choices=["space", "newforms", "orbits", "qexp",
                                 "model", "map", "verify"])
    parser.add_argument("-c", "--config", help="path to a JSON config")
    parser.add_argument("--prec", type=int, default=None,
                        help="series precision (overrides the config)")
    parser.add_argument("-o", "--output", default="out",
                        help="output directory for artifacts")
    args = parser.parse_args(argv)

    started = time.time()
    config = None
    config_doc = None
    if args.command != "verify" or args.config:
        if not args.config:
            print("error: --config is required for %r" % args.command,
                  file=sys.stderr)
            return 1
        try:
            with open(args.config) as fh:
                text = fh.read()
            config_doc = json.loads(text)
            config = parse_config(text)
        except (OSError, ConfigError) as e:
            print("config error: %s" % e, file=sys.stderr)
            return 1
    if args.prec is not None and config is not None:
        config.prec = args.prec

    os.makedirs(args.output, exist_ok=True)
    status = 0
    try:
        if args.command == "space":
            artifacts = cmd_space(config, args, args.output)
        elif args.command == "newforms":
            artifacts = cmd_newforms(config, args, args.output)
        elif args.command == "orbits":
            artifacts = cmd_orbits(config, args, args.output)
        elif args.command == "qexp":
            artifacts, _ = cmd_qexp(config, args, args.output)
        elif args.command == "model":
            artifacts = cmd_model(config, args, args.output)
        elif args.command == "map":
            artifacts = cmd_map(config, args, args.output)
        else:
            artifacts, status = cmd_verify(config, args, args.output)
    except PrecisionError as e:
        print("precision error: %s" % e, file=sys.stderr)
        return 2
    except (ArithmeticError, ValueError) as e:
        print("computation failed: %s" % e, file=sys.stderr)
        return 2
    write_manifest(args.output, config_doc, artifacts,
                   config.prec if config else None,
                   config.h if config else None, started)
    return status


if __name__ == "__main__":
    sys.exit(main())
