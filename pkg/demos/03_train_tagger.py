"""
Training a small residual-stack tagger
=======================================

Character biRNN features and word embeddings feed a stack of biLSTMs. Each
upper layer also sees the raw word features. A CRF sits on top. Training
uses SGD with momentum and keeps the checkpoint with the best dev F1.
"""

from rescrf.encoder import EncoderConfig
from rescrf.evaluation import entity_f1
from rescrf.synthetic import pattern_corpus
from rescrf.training import TrainConfig, checkpoint_bytes, checkpoint_from_bytes, train

sents = pattern_corpus(60, seed=0)
train_set, dev_set = sents[:45], sents[45:]
print(" ".join(f"{w}/{t}" for w, t in zip(train_set[0].words, train_set[0].labels)))

# a deliberately tiny encoder so the demo runs in seconds
encoder = EncoderConfig(char_emb_dim=8, char_hidden_dim=8, word_emb_dim=16,
                        word_hidden_dim=16, num_layers=2)
result = train(train_set, dev_set, TrainConfig(epochs=8, seed=0), encoder,
               log=lambda r: print(f"epoch {r.epoch}: loss {r.loss:7.3f}  dev F1 {r.dev_f1:6.2f}"))

tagger = result.checkpoint.tagger
pred = tagger.tag(dev_set)
print(entity_f1(pred, [s.labels for s in dev_set]).text())

# checkpoints are a self-describing binary blob; loading gives the same tagger
blob = checkpoint_bytes(result.checkpoint)
again = checkpoint_from_bytes(blob).tagger
print("checkpoint bytes:", len(blob), " same tags after reload:", again.tag(dev_set) == pred)
