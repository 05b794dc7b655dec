"""
ArmorBench - an adversarial robustness workbench.
Main application entry point.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np
import structlog

from .attacks import attack_success_rate, generate_attacks, load_adversarial_set, save_adversarial_set
from .config import CONFIG_ENV, Config, load_config, set_override
from .data import (
    export_images,
    gen_synthetic,
    load_cifar10,
    load_dataset,
    resize_dataset,
    save_dataset,
    split,
    write_annotations,
)
from .detectors import (
    detection_task,
    feature_set_from_attacks,
    save_detector,
    sensitivity_sweep,
    split_features,
    train_detectors,
    write_sweep_csv,
)
from .errors import ArmorBenchError, ConfigError, DependencyError
from .model import init_model, load_checkpoint, save_checkpoint, softmax, train
from .report import (
    held_out_analysis,
    read_json,
    render_bar_chart,
    render_confusion_heatmap,
    write_confusion_csv,
    write_json,
    write_predictions_csv,
    write_report,
)
from .training import build_adversarial_dataset, evaluate_model, retrain, write_monitor_log
from .utils.image import save_image_grid
from .utils.log import configure_logging

log = structlog.get_logger()

# Artifact paths relative to the output directory, with the step producing each
ARTIFACTS = {
    "train": ("data/train.adat", "gen-data"),
    "val": ("data/val.adat", "gen-data"),
    "train_annotations": ("data/train_annotations.csv", "gen-data"),
    "val_annotations": ("data/val_annotations.csv", "gen-data"),
    "images": ("data/images", "gen-data"),
    "baseline": ("models/baseline.avlm", "train-base"),
    "baseline_log": ("models/baseline_log.csv", "train-base"),
    "finetuned": ("models/finetuned.avlm", "retrain"),
    "monitor_log": ("models/monitor_log.csv", "retrain"),
    "success": ("attacks/success.json", "attack"),
    "attack_preview": ("attacks/preview.png", "attack"),
    "train_adv": ("advsets/train_adv.adat", "build-advset"),
    "val_adv": ("advsets/val_adv.adat", "build-advset"),
    "detector_results": ("detectors/results.json", "train-detectors"),
    "sweep": ("sweep/sweep.csv", "sweep"),
    "report": ("report/report.json", "report"),
    "predictions": ("report/predictions.csv", "report"),
}

# attacks whose examples become detector feature rows
FEATURE_ATTACKS = ("fgsm", "deepfool", "autoattack")

PIPELINE = ("gen-data", "train-base", "attack", "build-advset", "retrain", "eval", "train-detectors", "report")
COMMANDS = PIPELINE[:-1] + ("sweep", "report", "pipeline")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="armorbench",
        description="ArmorBench - adversarial attacks, adversarial fine-tuning and detectors",
    )
    parser.add_argument("command", choices=COMMANDS, help="Pipeline step to run")
    parser.add_argument("--config", type=str, default=None, help=f"JSON config file (default: ${CONFIG_ENV})")
    parser.add_argument("--seed", type=int, default=None, help="Global seed")
    parser.add_argument("--output-dir", type=str, default=None, help="Directory for every artifact")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for per-sample attacks")
    parser.add_argument("--epsilon", type=float, default=None, help="L-infinity attack budget")
    parser.add_argument("--log-level", type=str, default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-timestamps", action="store_true", help="Add ISO timestamps to log lines")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Override a config value, e.g. --set attack.apgd_iters=20 (value parsed as JSON)",
    )
    return parser


class ArmorBenchApp:
    """Main application class for ArmorBench."""

    def __init__(self, argv=None):
        """Parse the command line; configuration is loaded by run()."""
        self.args = build_parser().parse_args(argv)
        self.config = None

    def load_config(self):
        """Config file, then --set overrides, then dedicated flags."""
        args = self.args
        path = args.config or os.environ.get(CONFIG_ENV)
        config = load_config(path) if path else Config()

        data = config.data
        for override in args.overrides:
            key, sep, value = override.partition("=")
            if not sep:
                raise ConfigError(f"expected KEY=VALUE, got {override!r}", "--set")
            data = set_override(data, key.strip(), value)
        flags = {
            "seed": args.seed,
            "output_dir": args.output_dir,
            "threads": args.threads,
            "attack.epsilon": args.epsilon,
            "log.level": args.log_level.upper() if args.log_level else None,
            "log.timestamps": True if args.log_timestamps else None,
        }
        for key, value in flags.items():
            if value is not None:
                data = set_override(data, key, json.dumps(value))
        config.data = data
        return config

    def run(self):
        """Run the selected command; returns the process exit code."""
        configure_logging()
        try:
            self.config = self.load_config()
            configure_logging(self.config.get("log.level"), self.config.get("log.timestamps"))
            steps = PIPELINE if self.args.command == "pipeline" else (self.args.command,)
            for step in steps:
                log.info("step started", step=step)
                getattr(self, "cmd_" + step.replace("-", "_"))()
                log.info("step finished", step=step)
        except ArmorBenchError as exc:
            log.error("command failed", command=self.args.command, error=str(exc))
            print(f"armorbench: error: {exc}", file=sys.stderr)
            return 1
        except OSError as exc:
            log.error("command failed", command=self.args.command, error=str(exc), errno=exc.errno)
            print(f"armorbench: error: {exc}", file=sys.stderr)
            return 1
        return 0

    # Paths and artifact loading

    def path(self, name, *parts):
        if name in ARTIFACTS:
            return os.path.join(self.config.get("output_dir"), ARTIFACTS[name][0], *parts)
        return os.path.join(self.config.get("output_dir"), name, *parts)

    def require(self, name, path=None, step=None):
        path = path or self.path(name)
        if not os.path.exists(path):
            raise DependencyError(path, step or ARTIFACTS.get(name, (None, None))[1])
        return path

    def load_split(self, name):
        return load_dataset(self.require(name))

    def load_model(self, name):
        return load_checkpoint(self.require(name))

    def attack_path(self, kind):
        return self.path("attacks", f"{kind}.aadv")

    def eval_path(self, model_name, split_name):
        return self.path("eval", f"{model_name}_{split_name}.json")

    # Commands

    def cmd_gen_data(self):
        cfg = self.config
        seed, n = cfg.get("seed"), cfg.get("data.n")
        height, width = cfg.get("data.height"), cfg.get("data.width")
        if cfg.get("data.source") == "synthetic":
            dataset = gen_synthetic(seed, n, cfg.get("data.num_classes"), height, width)
        else:
            cifar_path = cfg.get("data.cifar_path")
            if not cifar_path:
                raise ConfigError("required when data.source is cifar10", "data.cifar_path")
            dataset = resize_dataset(load_cifar10(cifar_path).head(n), height, width)

        train_set, val_set = split(dataset, cfg.get("data.train_fraction"), seed)
        save_dataset(train_set, self.path("train"))
        save_dataset(val_set, self.path("val"))
        write_annotations(train_set, self.path("train_annotations"))
        write_annotations(val_set, self.path("val_annotations"))
        if cfg.get("data.export_images"):
            export_images(train_set, self.path("images", "train"))
            export_images(val_set, self.path("images", "val"))
        log.info("data written", n_train=train_set.N, n_val=val_set.N, source=dataset.source.value)

    def cmd_train_base(self):
        cfg = self.config
        train_set, val_set = self.load_split("train"), self.load_split("val")
        model = init_model(
            cfg.arch(train_set.num_classes),
            cfg.get("seed"),
            class_names=train_set.class_names,
            temperature=cfg.get("model.temperature"),
        )
        model, records = train(model, train_set, cfg.train_config(), val_clean=val_set)
        save_checkpoint(model, self.path("baseline"))
        write_monitor_log(records, self.path("baseline_log"))

    def cmd_attack(self):
        cfg = self.config
        model, val_set = self.load_model("baseline"), self.load_split("val")
        limit = cfg.get("attack.eval_samples")
        targets = val_set if limit is None else val_set.head(limit)
        attack_config = cfg.attack_config()

        results = generate_attacks(model, targets, cfg.attack_kinds(), attack_config, cfg.get("threads"))
        success = {}
        for kind, examples in results.items():
            save_adversarial_set(examples, self.attack_path(kind), attack_config, targets.image_shape)
            success[kind] = attack_success_rate(model, examples)[0]
            log.info("attack success rate", kind=kind, rate=success[kind])
        write_json(success, self.path("success"))
        self.save_preview(targets, results)

    def save_preview(self, targets, results, rows=8):
        """Clean images next to their adversarial versions, one row per sample."""
        grid = [
            [targets.images[i]] + [results[kind][i].adv_pixels for kind in results]
            for i in range(min(rows, targets.N))
        ]
        if grid:
            save_image_grid(grid, self.path("attack_preview"))

    def cmd_build_advset(self):
        cfg = self.config
        model = self.load_model("baseline")
        train_set, val_set = self.load_split("train"), self.load_split("val")
        advtrain = cfg.advtrain_config()

        train_adv = build_adversarial_dataset(model, train_set, advtrain)
        val_adv = build_adversarial_dataset(model, val_set, replace(advtrain, seed=advtrain.seed + 1), mix=advtrain.val_mix)
        save_dataset(train_adv, self.path("train_adv"))
        save_dataset(val_adv, self.path("val_adv"))

    def cmd_retrain(self):
        model = self.load_model("baseline")
        train_adv = self.load_split("train_adv")
        val_set, val_adv = self.load_split("val"), self.load_split("val_adv")

        finetuned, records = retrain(model, train_adv, val_set, val_adv, self.config.retrain_config())
        save_checkpoint(finetuned, self.path("finetuned"))
        write_monitor_log(records, self.path("monitor_log"))

    def cmd_eval(self):
        self.require("baseline")
        val_set, val_adv = self.load_split("val"), self.load_split("val_adv")
        names = ["baseline"]
        if os.path.exists(self.path("finetuned")):
            names.append("finetuned")
        else:
            log.warning("no fine-tuned checkpoint, evaluating the baseline only", path=self.path("finetuned"))

        for name in names:
            model = self.load_model(name)
            for split_name, dataset in (("clean", val_set), ("adv", val_adv)):
                result = evaluate_model(model, dataset)
                write_json(result, self.eval_path(name, split_name))
                log.info("model evaluated", model=name, split=split_name, accuracy=result.accuracy)

    def feature_split(self):
        """Detector feature rows from the validation set and the stored attacks, split by source id."""
        cfg = self.config
        model = self.load_model(cfg.get("detectors.source_model"))
        val_set = self.load_split("val")
        adversarial = {
            kind: load_adversarial_set(self.require(kind, self.attack_path(kind), "attack"))[0]
            for kind in FEATURE_ATTACKS
        }
        attacked = np.unique([e.original_id for examples in adversarial.values() for e in examples])
        clean = val_set.subset(np.flatnonzero(np.isin(val_set.ids, attacked)))
        features = feature_set_from_attacks(model, clean, adversarial)
        return split_features(features, cfg.get("detectors.train_fraction"), cfg.get("seed"))

    def cmd_train_detectors(self):
        cfg = self.config
        train_fs, held_fs = self.feature_split()
        kinds, params = cfg.detector_kinds(), cfg.detector_params()

        tasks = {"classification": (train_fs, held_fs, "")}
        if cfg.get("detectors.detection"):
            tasks["detection"] = (detection_task(train_fs), detection_task(held_fs), "detect_")

        summary = {}
        for task, (train_set, eval_set, prefix) in tasks.items():
            results = train_detectors(train_set, eval_set, kinds, params)
            summary[task] = {}
            for kind, (detector, confusion, bundle) in results.items():
                save_detector(detector, self.path("detectors", f"{prefix}{kind}.adet"))
                summary[task][kind] = {"metrics": bundle, "confusion": confusion.counts}
        summary["n_train"], summary["n_eval"] = train_fs.N, held_fs.N
        write_json(summary, self.path("detector_results"))

    def cmd_sweep(self):
        cfg = self.config
        train_fs, held_fs = self.feature_split()
        grid = (cfg.get("sweep.lr"), cfg.get("sweep.depth_or_leaves"))
        params = cfg.detector_params("sweep")
        rows = []
        for kind in cfg.detector_kinds("sweep"):
            rows += sensitivity_sweep(kind, grid, train_fs, held_fs, params.get(kind), seed=cfg.get("seed"))
        write_sweep_csv(rows, self.path("sweep"))

    def cmd_report(self):
        cfg = self.config
        evals = {
            (name, split_name): read_json(self.require(None, self.eval_path(name, split_name), "eval"))
            for name in ("baseline", "finetuned")
            for split_name in ("clean", "adv")
        }
        success = read_json(self.require("success"))
        detector_results = read_json(self.require("detector_results"))
        classification = detector_results["classification"]
        detection = detector_results.get("detection")

        report_dir = os.path.dirname(self.path("report"))
        val_set = self.load_split("val")
        finetuned = self.load_model("finetuned")
        held_out = val_set.head(min(cfg.get("report.held_out"), val_set.N))
        rows, held_summary = held_out_analysis(
            softmax(finetuned.logits(held_out.images)), held_out.labels, held_out.ids
        )
        write_predictions_csv(rows, self.path("predictions"))

        write_report(
            self.path("report"),
            baseline=evals[("baseline", "adv")]["metrics"],
            finetuned=evals[("finetuned", "adv")]["metrics"],
            attack_success=success,
            detectors=[(kind, entry["metrics"]) for kind, entry in classification.items()],
            clean={
                "baseline": evals[("baseline", "clean")]["metrics"],
                "finetuned": evals[("finetuned", "clean")]["metrics"],
            },
            detection=None if detection is None else [
                {"kind": kind, "metrics": entry["metrics"]} for kind, entry in detection.items()
            ],
            held_out=held_summary,
        )

        confusions = {
            "baseline_adv": evals[("baseline", "adv")]["confusion"],
            "finetuned_adv": evals[("finetuned", "adv")]["confusion"],
        }
        confusions.update({kind: entry["confusion"] for kind, entry in classification.items()})
        for name, counts in confusions.items():
            write_confusion_csv(counts, os.path.join(report_dir, f"confusion_{name}.csv"))

        if cfg.get("report.charts"):
            self.render_charts(report_dir, evals, success, classification, confusions, val_set.class_names)

    def render_charts(self, report_dir, evals, success, classification, confusions, class_names):
        robustness = []
        for key, label in (("accuracy", "accuracy"), ("macro_precision", "precision"),
                           ("macro_recall", "recall"), ("macro_f1", "F1")):
            for name in ("baseline", "finetuned"):
                robustness.append((f"{name} {label}", evals[(name, "adv")]["metrics"][key]))
        render_bar_chart(robustness, os.path.join(report_dir, "robustness.svg"),
                         title="Adversarial validation metrics", ylim=(0.0, 1.0))
        render_bar_chart(success, os.path.join(report_dir, "attack_success.svg"),
                         title="Attack success rate", ylim=(0.0, 1.0))
        render_bar_chart({kind: entry["metrics"]["accuracy"] for kind, entry in classification.items()},
                         os.path.join(report_dir, "detectors.svg"), title="Detector accuracy", ylim=(0.0, 1.0))
        for name, counts in confusions.items():
            names = class_names if len(counts) == len(class_names) else None
            render_confusion_heatmap(counts, os.path.join(report_dir, f"confusion_{name}.svg"),
                                     class_names=names, title=name)


def main(argv=None):
    """Console entry point."""
    return ArmorBenchApp(argv).run()


if __name__ == "__main__":
    sys.exit(main())
