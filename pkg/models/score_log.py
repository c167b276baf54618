from flask_sqlalchemy import SQLAlchemy
from datetime import datetime

db = SQLAlchemy()

class ScoreLog(db.Model):
    __tablename__ = 'score_log'
    
    id = db.Column(db.Integer, primary_key=True, autoincrement=True)
    matcher_id = db.Column(db.String(32), nullable=False)
    template_id = db.Column(db.String(255), nullable=False)
    probe_id = db.Column(db.String(255), nullable=False)
    raw_score = db.Column(db.Float, nullable=False)
    normalized_score = db.Column(db.Float, default=None)
    label = db.Column(db.String(16), default=None)
    template_count = db.Column(db.Integer, default=None)
    probe_count = db.Column(db.Integer, default=None)
    created_at = db.Column(db.DateTime(timezone=True), default=datetime.utcnow)
    
    # Index for per-matcher summaries
    __table_args__ = (
        db.Index('idx_score_log_matcher_id', 'matcher_id'),
    )
    
    @classmethod
    def create_log(cls, matcher_id, template_id, probe_id, raw_score,
                   normalized_score=None, label=None, template_count=None, probe_count=None):
        """Create a new score log entry"""
        return cls(
            matcher_id=matcher_id,
            template_id=template_id,
            probe_id=probe_id,
            raw_score=raw_score,
            normalized_score=normalized_score,
            label=label,
            template_count=template_count,
            probe_count=probe_count
        )
    
    def to_dict(self):
        """Convert score log to dictionary for API responses"""
        return {
            'id': self.id,
            'matcher': self.matcher_id,
            'template_id': self.template_id,
            'probe_id': self.probe_id,
            'raw': self.raw_score,
            'normalized': self.normalized_score,
            'label': self.label,
            'template_count': self.template_count,
            'probe_count': self.probe_count,
            'created_at': self.created_at.isoformat() if self.created_at else None
        }
    
    def __repr__(self):
        return f'<ScoreLog {self.id}: {self.matcher_id} {self.template_id} vs {self.probe_id}>'
