"""train: fit one codec per configured codebook size and checkpoint it"""
from csaeo.harness.common import (
    checkpoint_path, load_dataset, prepare_artifacts, split_dataset, summary_name, write_csv, write_summary,
)
from csaeo.models.config import AppConfig
from csaeo.semantic.checkpoint import write_checkpoint
from csaeo.semantic.data import nearest_mean_oracle
from csaeo.semantic.dtjscc import predict
from csaeo.sim.metrics import top1
from csaeo.sim.pipeline import train_codec
from csaeo.utils.encoder import CSV_SCHEMA_VERSION
from csaeo.utils.i18n import t
from csaeo.utils.logger import logger

TRACE_NAME = "train_trace.csv"
TRACE_COLUMNS = ("schema_version", "k_q", "epoch", "loss", "train_top1")


def train_handler(cfg: AppConfig) -> dict:
    """Write codec-kq<K>.dtjc per K in dtjscc.codebook_sizes plus the per-epoch trace"""
    sizes = cfg.dtjscc.codebook_sizes
    names = [checkpoint_path(cfg, k_q).name for k_q in sizes] + [TRACE_NAME, summary_name("train")]
    paths = prepare_artifacts(cfg, names)
    *checkpoints, trace_path, summary_path = paths

    dataset = load_dataset(cfg)
    train_set, test_set = split_dataset(cfg, dataset)
    oracle = nearest_mean_oracle(test_set, reference=train_set)

    rows, results = [], {}
    for k_q, path in zip(sizes, checkpoints):
        logger.info(t("training_codec", k_q=k_q))
        codec, trace = train_codec(cfg, train_set, k_q, cfg.harness.seed)
        write_checkpoint(codec, path)
        test_top1 = top1(predict(test_set.images, codec), test_set.labels)
        rows += [(CSV_SCHEMA_VERSION, k_q, epoch, loss, acc) for epoch, loss, acc in trace.rows()]
        results[str(k_q)] = {
            "checkpoint": str(path),
            "trace": trace,
            "test_top1": test_top1,
        }
        final = trace.accuracy[-1] if trace.accuracy else float("nan")
        logger.info(t("train_summary", k_q=k_q, train=final, test=test_top1, oracle=oracle))

    write_csv(trace_path, TRACE_COLUMNS, rows)
    summary = {
        "command": "train",
        "seed": cfg.harness.seed,
        "n_train": len(train_set),
        "n_test": len(test_set),
        "nearest_mean_oracle": oracle,
        "codecs": results,
    }
    write_summary(summary_path, summary)
    return summary


__all__ = ('train_handler', )
