from flask import Blueprint, current_app, jsonify, request
import logging
from models import db, ScoreLog, ScoreRecord
from utils.evaluation import summarize
from utils.fusion import MATCHER_NORMALIZERS, NormalizerKind
from utils.template_io import format_template
from utils.validation import input_validator

logger = logging.getLogger(__name__)

matching_bp = Blueprint('matching', __name__)

def _service():
    return current_app.extensions['matching_service']

def _uploaded(field_name):
    """Bytes of an uploaded file, or None when it is missing"""
    upload = request.files.get(field_name)
    if upload is None:
        return None
    return upload.read()

def _invalid(validation):
    return jsonify({
        'success': False,
        'error': validation['error'],
        'error_code': validation['error_code']
    }), 400

@matching_bp.route('/api/extract', methods=['POST'])
def extract_template():
    """Extract a minutiae template from an uploaded PGM image"""
    data = _uploaded('image')
    if data is None:
        return jsonify({
            'success': False,
            'error': 'image file is required',
            'error_code': 'MISSING_IMAGE'
        }), 400

    method = request.form.get('method', _service().config['extract.method'])
    validation = input_validator.validate_method(method)
    if not validation['valid']:
        return _invalid(validation)

    kind, image = _service().parse_input(data)
    if kind != 'image':
        return jsonify({
            'success': False,
            'error': f'expected a PGM image, got a {kind}',
            'error_code': 'INPUT_TYPE_MISMATCH'
        }), 400

    template = _service().extraction.extract_template(image, validation['value'])
    return jsonify({
        'success': True,
        'method': validation['value'],
        'template': template.to_dict(),
        'template_text': format_template(template)
    })

@matching_bp.route('/api/match', methods=['POST'])
def match():
    """Compare two uploaded inputs and log the score"""
    data_a, data_b = _uploaded('a'), _uploaded('b')
    if data_a is None or data_b is None:
        return jsonify({
            'success': False,
            'error': 'files "a" and "b" are required',
            'error_code': 'MISSING_INPUT'
        }), 400

    matcher_validation = input_validator.validate_matcher_id(request.form.get('matcher'))
    if not matcher_validation['valid']:
        return _invalid(matcher_validation)
    label_validation = input_validator.validate_label(request.form.get('label'))
    if not label_validation['valid']:
        return _invalid(label_validation)

    identifiers = {}
    for field_name, fallback in (('template_id', 'a'), ('probe_id', 'b')):
        validation = input_validator.validate_identifier(request.form.get(field_name), field_name)
        if not validation['valid']:
            return _invalid(validation)
        identifiers[field_name] = validation['value'] or request.files[fallback].filename or fallback

    matcher_id = matcher_validation['value']
    normalizer = current_app.extensions.get('normalizers', {}).get(matcher_id)
    result = _service().match(matcher_id, data_a, data_b, normalizer)

    try:
        log = ScoreLog.create_log(
            matcher_id=matcher_id,
            template_id=identifiers['template_id'],
            probe_id=identifiers['probe_id'],
            raw_score=result['raw'],
            normalized_score=result['normalized'],
            label=label_validation['value'],
            template_count=result['counts'][0],
            probe_count=result['counts'][1]
        )
        db.session.add(log)
        db.session.commit()
    except Exception as e:
        db.session.rollback()
        logger.error(f"Error logging score: {e}")
        return jsonify({
            'success': False,
            'error': 'Failed to log score',
            'error_code': 'DATABASE_ERROR'
        }), 500

    return jsonify({
        'success': True,
        'score_id': log.id,
        **result
    })

@matching_bp.route('/api/scores', methods=['GET'])
def list_scores():
    """Logged comparisons, newest first"""
    query = ScoreLog.query
    matcher_id = request.args.get('matcher')
    if matcher_id:
        validation = input_validator.validate_matcher_id(matcher_id)
        if not validation['valid']:
            return _invalid(validation)
        query = query.filter_by(matcher_id=validation['value'])

    limit_validation = input_validator.validate_int(request.args.get('limit', 100), 'limit', 1, 1000)
    if not limit_validation['valid']:
        return _invalid(limit_validation)

    logs = query.order_by(ScoreLog.id.desc()).limit(limit_validation['value']).all()
    return jsonify({
        'success': True,
        'count': len(logs),
        'scores': [log.to_dict() for log in logs]
    })

def _as_record(log):
    """Similarity-convention record; unnormalized distances are negated to keep their ranking"""
    score = log.normalized_score
    if score is None:
        dissimilar = MATCHER_NORMALIZERS.get(log.matcher_id) is NormalizerKind.EXP_DISSIM
        score = -log.raw_score if dissimilar else log.raw_score
    return ScoreRecord(log.matcher_id, log.template_id, log.probe_id, log.label, score)

@matching_bp.route('/api/scores/summary', methods=['GET'])
def score_summary():
    """EER and AUC per matcher over labeled logged comparisons"""
    logs = ScoreLog.query.filter(ScoreLog.label.isnot(None)).order_by(ScoreLog.id).all()

    by_matcher = {}
    for log in logs:
        by_matcher.setdefault(log.matcher_id, []).append(_as_record(log))

    return jsonify({
        'success': True,
        'matchers': {matcher_id: summarize(records) for matcher_id, records in sorted(by_matcher.items())}
    })
