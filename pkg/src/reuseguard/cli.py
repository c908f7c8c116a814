"""Command-line entry points: planner, responder, requester, directoryd."""

from __future__ import annotations

import argparse
import getpass
import sys
import time

from . import bench, planner
from .errors import ConsentRequiredError, InfeasibleError, ReuseGuardError


def planner_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="planner",
        description="Pick protocol parameters, fit latency models, run benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="maximize detection under a time goal")
    p_opt.add_argument("--t-goal", type=float, required=True,
                       help="response-time goal in seconds")
    p_opt.add_argument("--d", type=int, default=0, help="honeyword count")
    p_opt.add_argument("--responders", type=int, required=True,
                       help="number of responders registered for the account")
    p_opt.add_argument("--model", choices=sorted(planner.REFERENCE_MODELS),
                       default="trusted")
    p_opt.add_argument("--coeffs", help="latency coefficients file (key = value lines)")
    p_opt.add_argument("--curve", help="reuse curve file (x,p lines)")

    p_fit = sub.add_parser("fit", help="fit latency coefficients from a CSV")
    p_fit.add_argument("--csv", required=True,
                       help="bench output or bare rho,n,time CSV")

    p_bench = sub.add_parser("bench", help="run the local benchmark harness")
    p_bench.add_argument("--curve-id", default="P192",
                         choices=["P160", "P192", "P224", "P256"])
    p_bench.add_argument("--n", type=int, nargs="+", default=[1, 8])
    p_bench.add_argument("--rho", type=int, nargs="+", default=[1, 4])
    p_bench.add_argument("--rounds", type=int, default=3)
    p_bench.add_argument("--profile", choices=["none", "trusted", "untrusted"],
                         default="none")
    p_bench.add_argument("--threshold", type=float, default=5.0,
                         help="qualifying response-time threshold in seconds")
    p_bench.add_argument("--out", help="CSV output path (default: stdout)")

    args = parser.parse_args(argv)

    if args.command == "optimize":
        model = planner.REFERENCE_MODELS[args.model]
        if args.coeffs:
            with open(args.coeffs) as fh:
                model = planner.parse_coeffs_file(fh.read())
        curve = planner.DEFAULT_REUSE_CURVE
        if args.curve:
            with open(args.curve) as fh:
                curve = planner.parse_curve_file(fh.read())
        try:
            plan = planner.optimize(args.t_goal, args.responders, args.d,
                                    model, curve)
        except InfeasibleError as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            return 1
        print(f"n = {plan.n}")
        print(f"rho = {plan.rho}")
        print(f"tdr = {plan.tdr:.4f}")
        print(f"t_predicted = {plan.t_predicted:.4f} s")
        return 0

    if args.command == "fit":
        with open(args.csv) as fh:
            samples = bench.read_fit_samples(fh)
        try:
            model = planner.fit_model(samples)
        except ValueError as exc:
            print(f"fit failed: {exc}", file=sys.stderr)
            return 1
        for name in ("c0", "c1", "c2", "c3"):
            print(f"{name} = {getattr(model, name):.6e}")
        print(f"rmse = {model.rmse:.4f}")
        return 0

    if args.command == "bench":
        from .netnodes import PROFILES
        profile = None if args.profile == "none" else PROFILES[args.profile]
        scenario = bench.BenchScenario(
            curve=args.curve_id, n_values=tuple(args.n),
            rho_values=tuple(args.rho), rounds=args.rounds, profile=profile,
            qualifying_threshold_s=args.threshold)
        records = bench.bench_run(scenario)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                bench.write_csv(records, fh)
        else:
            bench.write_csv(records, sys.stdout)
        return 0

    return 2


def responder_main(argv=None) -> int:
    from .netnodes import PROFILES, ResponderStore, serve_responder

    parser = argparse.ArgumentParser(
        prog="responder",
        description="Serve membership-test responses for stored similar sets.")
    parser.add_argument("--store", required=True,
                        help="similar-set store (file or directory of .simset)")
    parser.add_argument("--listen", required=True, help="host:port to bind")
    parser.add_argument("--profile", choices=["trusted", "untrusted"],
                        default="trusted",
                        help="emulated transport path for outbound replies")
    args = parser.parse_args(argv)

    store = ResponderStore.load(args.store)
    reply_profile = PROFILES[args.profile] if args.profile == "untrusted" else None
    server = serve_responder(store, args.listen, reply_profile=reply_profile)
    print(f"responder listening on {server.address} "
          f"({len(store.accounts())} accounts)", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def requester_main(argv=None) -> int:
    from .netnodes import PROFILES, DecoyPolicy, DirectoryClient, requester_set_password

    parser = argparse.ArgumentParser(
        prog="requester",
        description="Set a password after checking for cross-site reuse.")
    parser.add_argument("--directory", required=True, help="directory host:port")
    parser.add_argument("--account", required=True, help="account email address")
    parser.add_argument("--t-goal", type=float, required=True,
                        help="response-time goal in seconds")
    parser.add_argument("--decoys", action="store_true",
                        help="run decoy protocol executions after acceptance")
    parser.add_argument("--password",
                        help="candidate password (prompted when omitted)")
    parser.add_argument("--profile", choices=["trusted", "untrusted"],
                        default="trusted")
    parser.add_argument("--d", type=int, default=0, help="honeyword count assumed")
    parser.add_argument("--hash-cost", type=int, default=None,
                        help="log2 scrypt cost for candidate digests "
                             "(must match the responders' stores)")
    parser.add_argument("--register-endpoint",
                        help="endpoint to register for this account on acceptance")
    parser.add_argument("--auto-consent", action="store_true",
                        help="request and confirm a consent token first "
                             "(stands in for the account owner's click)")
    args = parser.parse_args(argv)

    from .similarity import DEFAULT_HASH_PARAMS, SlowHashParams
    hash_params = DEFAULT_HASH_PARAMS
    if args.hash_cost is not None:
        hash_params = SlowHashParams(log2_n=args.hash_cost)

    password = args.password or getpass.getpass("candidate password: ")
    client = DirectoryClient(args.directory, PROFILES[args.profile])
    try:
        if args.auto_consent:
            token = client.begin_consent(args.account)
            client.confirm_consent(token)
        result = requester_set_password(
            client, args.account, password, args.t_goal,
            DecoyPolicy(enabled=args.decoys), d=args.d,
            hash_params=hash_params,
            register_endpoint=args.register_endpoint)
    except ConsentRequiredError:
        print("rejected: no open consent window (queries were dropped)",
              file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 2
    except ReuseGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    if result.accepted:
        if result.plan is None:
            print("accepted (first site for this account, nothing to check)")
        else:
            print(f"accepted (runs={result.runs}, rho={result.plan.rho}, "
                  f"n={result.plan.n}, responses={result.responses_received})")
        return 0
    print(f"rejected: {result.detections} of {result.responses_received} "
          f"responders report a similar password")
    return 1


def directoryd_main(argv=None) -> int:
    from .directory import Directory, TIMEOUT_PROFILES
    from .netnodes import PROFILES, make_tcp_responder_transport, serve_directory

    parser = argparse.ArgumentParser(
        prog="directoryd",
        description="Run the account directory and query fan-out daemon.")
    parser.add_argument("--listen", required=True, help="host:port to bind")
    parser.add_argument("--profile", choices=["trusted", "untrusted"],
                        default="trusted")
    parser.add_argument("--early-return-fraction", type=float, default=None,
                        help="return once this share of responses arrived")
    parser.add_argument("--window-seconds", type=float, default=60.0)
    parser.add_argument("--state-dir", default=None)
    args = parser.parse_args(argv)

    profile = PROFILES[args.profile]
    transport_profile = profile if args.profile == "untrusted" else None
    directory = Directory(
        make_tcp_responder_transport(transport_profile),
        window_seconds=args.window_seconds,
        per_responder_timeout=TIMEOUT_PROFILES[args.profile],
        early_return_fraction=args.early_return_fraction,
        state_dir=args.state_dir)
    server = serve_directory(directory, args.listen)
    print(f"directory listening on {server.address} (profile={args.profile})", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.shutdown()
        directory.close()
    return 0
